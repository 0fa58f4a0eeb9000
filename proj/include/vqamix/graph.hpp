// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "vqamix/tensor.hpp"

namespace vqamix {

class Graph;

// Handle to a node in a Graph. Cheap to copy; invalid when default-constructed.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int id) : g_(g), id_(id) {}
  bool valid() const { return g_ != nullptr; }
  Graph* graph() const { return g_; }
  int id() const { return id_; }
  const Tensor& value() const;
  const std::vector<int>& shape() const { return value().shape(); }

 private:
  Graph* g_ = nullptr;
  int id_ = -1;
};

// Small integer matrix, used for relative-position bucket lookups.
struct IntMat {
  int rows = 0, cols = 0;
  std::vector<int32_t> v;
  IntMat() = default;
  IntMat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0) {}
  int32_t& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  int32_t at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

// Reverse-mode tape. Nodes are appended in topological order by construction;
// backward() walks them once in reverse. Single-writer; one backward per graph.
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf over external parameter storage. Repeated calls with the same
  // parameter return the same node so gradients accumulate in one buffer.
  Var param(Parameter& p);
  Var constant(Tensor t);

  void mark_output(Var root);  // root must be scalar
  void backward();             // requires mark_output; rejected on second call
  void backward(Var root) {
    mark_output(root);
    backward();
  }

  bool grad_enabled() const { return grad_enabled_; }
  bool backward_done() const { return backward_done_; }
  size_t node_count() const { return nodes_.size(); }

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  // Gradient of a node, or nullptr if backward never reached it.
  const Tensor* grad_of(Var v) const;

  // --- low-level surface used by the op builders ---
  using BackFn = std::function<void(Graph&, int self)>;
  Var make_node(Tensor value, std::vector<int> inputs, bool needs_grad, BackFn back);
  Tensor& grad_buf(int id);
  bool needs(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched by backward
    std::vector<int> inputs;
    BackFn back;
    Parameter* leaf = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> leaf_ids_;
  int root_id_ = -1;
  bool grad_enabled_ = true;
  bool finalized_ = false;
  bool backward_done_ = false;
};

// --- kernels (all differentiable unless noted) ---
Var add(Var a, Var b);                   // same shape
Var add_rowvec(Var m, Var row);          // [RxC] + [C]
Var mul(Var a, Var b);                   // elementwise
Var scale(Var a, double c);
Var sum(Var a);                          // -> scalar
Var matmul(Var a, Var b);                // [mxk]*[kxn]
Var transpose(Var a);                    // 2-d
Var reshape(Var a, std::vector<int> shape);
Var gelu(Var a);                         // tanh approximation
Var layernorm(Var x, Var gain, Var bias, double epsilon);  // last-axis
Var softmax_rows(Var x);                 // 2-d, max-subtracted
Var slice_cols(Var x, int start, int len);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var embed_rows(Var table, const std::vector<int>& ids);        // [Vxd] gather
Var rel_bias(Var table, const IntMat& buckets, int head);      // [BxH] lookup
Var conv2d(Var input, Var kernel, Var bias, int stride, int pad);  // [HxWxC] in
// Mean NLL over positions whose target != ignore_id. Errors if all ignored.
Var softmax_cross_entropy(Var logits, const std::vector<int>& targets, int ignore_id);

}  // namespace vqamix
