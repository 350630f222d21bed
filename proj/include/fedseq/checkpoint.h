/*
 * Copyright 2026 The fedseq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
// Binary model checkpoint. All integers and doubles little-endian:
//
//   magic      8 bytes  "FSQCKPT1"
//   dims       4 x u32  item_count, dim, ff_dim, max_len
//   count      u32      number of tensors (9)
//   per tensor:
//     name_len u32, name bytes (no terminator)
//     rows u32, cols u32
//     rows*cols f64 values, row-major
//
// Tensors appear in the canonical order of tensor_refs().
#ifndef FEDSEQ_CHECKPOINT_H_
#define FEDSEQ_CHECKPOINT_H_

#include <string>

#include "fedseq/seqrec.h"

namespace fedseq {

std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace fedseq

#endif  // FEDSEQ_CHECKPOINT_H_
