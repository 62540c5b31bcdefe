// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
