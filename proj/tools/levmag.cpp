// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0

#include "levmag/cli/app.hpp"

int main(int argc, char** argv) { return levmag::cli::run_cli(argc, argv); }
