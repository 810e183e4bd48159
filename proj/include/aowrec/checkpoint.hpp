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

#ifndef AOWREC_CHECKPOINT_HPP_
#define AOWREC_CHECKPOINT_HPP_

#include <memory>
#include <string>

#include "aowrec/markov.hpp"
#include "aowrec/scorer.hpp"
#include "aowrec/tensor_file.hpp"
#include "aowrec/training.hpp"

namespace aowrec {

inline std::string EncodeModel(const Scorer& model) {
  if (const auto* n = dynamic_cast<const NeuralScorer*>(&model)) return EncodeCheckpoint(n->ToCheckpoint());
  if (const auto* m = dynamic_cast<const MarkovScorer*>(&model)) return EncodeCheckpoint(m->ToCheckpoint());
  throw CheckpointError("checkpoint: unsupported scorer type");
}

inline void SaveCheckpoint(const Scorer& model, const std::string& path) {
  WriteFileBytes(path, EncodeModel(model));
}

inline std::unique_ptr<Scorer> LoadCheckpoint(const std::string& path) {
  const CheckpointData ck = DecodeCheckpoint(ReadFileBytes(path));
  switch (static_cast<ScorerKind>(ck.kind)) {
    case ScorerKind::kMarkov:
      return std::make_unique<MarkovScorer>(MarkovScorer::FromCheckpoint(ck));
    case ScorerKind::kNeural:
      return std::make_unique<NeuralScorer>(NeuralScorer::FromCheckpoint(ck));
  }
  throw CheckpointError("checkpoint: unknown model kind " + std::to_string(ck.kind));
}

inline NeuralScorer LoadNeuralCheckpoint(const std::string& path) {
  return NeuralScorer::FromCheckpoint(DecodeCheckpoint(ReadFileBytes(path)));
}

inline MarkovScorer LoadMarkovCheckpoint(const std::string& path) {
  return MarkovScorer::FromCheckpoint(DecodeCheckpoint(ReadFileBytes(path)));
}

// Content hash of a model's serialized form.
inline std::string ModelDigest(const Scorer& model) { return HexDigest(Fnv1a64(EncodeModel(model))); }

}  // namespace aowrec

#endif  // AOWREC_CHECKPOINT_HPP_
