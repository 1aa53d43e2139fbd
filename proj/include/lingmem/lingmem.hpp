// Copyright 2026 The lingmem Authors.
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

#include "lingmem/annotation.hpp"
#include "lingmem/binary_io.hpp"
#include "lingmem/canonical_json.hpp"
#include "lingmem/corpus_builder.hpp"
#include "lingmem/dense_index.hpp"
#include "lingmem/errors.hpp"
#include "lingmem/evaluation.hpp"
#include "lingmem/memory_model.hpp"
#include "lingmem/memory_store.hpp"
#include "lingmem/retrieval.hpp"
#include "lingmem/symbolic_index.hpp"
#include "lingmem/synthetic.hpp"
#include "lingmem/toy_annotator.hpp"
#include "lingmem/tuner.hpp"
#include "lingmem/util.hpp"
