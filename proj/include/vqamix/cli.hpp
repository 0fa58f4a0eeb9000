// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace vqamix {

// Exit codes: 0 success, 2 config/usage, 3 data, 4 numeric, 5 io, 1 other.
int cli_main(int argc, const char* const* argv);

}  // namespace vqamix
