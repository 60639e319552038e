// Copyright 2026 The sdemd Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "sdemd/bag.hpp"
#include "sdemd/emd.hpp"
#include "sdemd/emd_oracle.hpp"
#include "sdemd/io.hpp"
#include "sdemd/quantizer.hpp"
#include "sdemd/retrieval.hpp"
#include "sdemd/trainer.hpp"
