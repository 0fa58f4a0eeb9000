// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/cli.hpp"

int main(int argc, char** argv) { return vqamix::cli_main(argc, argv); }
