// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "vmfkit/mixture.hpp"
#include "vmfkit/network.hpp"

namespace vmfkit {

// Self-describing text envelope: a "vmfkit-ckpt" header with version, kind
// and shape lines, hex-encoded little-endian 64-bit floats per tensor in
// declaration order, and a trailing CRC-32 of the raw payload bytes.
// Round-trips are bit-exact.

enum class CheckpointKind { kModel, kMixture };

std::string save_checkpoint(const Classifier& clf);
Classifier load_classifier_checkpoint(const std::string& bytes);

std::string save_mixture_checkpoint(const VmfMixture& mixture);
VmfMixture load_mixture_checkpoint(const std::string& bytes);

/// Inspects the header without decoding tensors.
CheckpointKind checkpoint_kind(const std::string& bytes);

/// CRC-32 (IEEE reflected polynomial) used by the envelope.
std::uint32_t crc32(const void* data, std::size_t size);

}  // namespace vmfkit
