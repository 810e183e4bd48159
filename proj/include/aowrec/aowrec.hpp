/*
 * Copyright 2026 The aowrec Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef AOWREC_AOWREC_HPP_
#define AOWREC_AOWREC_HPP_

#include "aowrec/attacks.hpp"
#include "aowrec/checkpoint.hpp"
#include "aowrec/common.hpp"
#include "aowrec/corpus.hpp"
#include "aowrec/markov.hpp"
#include "aowrec/metrics.hpp"
#include "aowrec/neural.hpp"
#include "aowrec/scorer.hpp"
#include "aowrec/tensor_file.hpp"
#include "aowrec/training.hpp"
#include "aowrec/watermark.hpp"

#endif  // AOWREC_AOWREC_HPP_
