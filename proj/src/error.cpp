// Copyright 2026 The par Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "par/error.hpp"

namespace par {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MissingSchema: return "MissingSchema";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::MissingImage: return "MissingImage";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DiskFull: return "DiskFull";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonBinaryTarget: return "NonBinaryTarget";
    case ErrorCode::DegenerateRatio: return "DegenerateRatio";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownBackbone: return "UnknownBackbone";
    case ErrorCode::WeightsLoadError: return "WeightsLoadError";
    case ErrorCode::StrictMismatch: return "StrictMismatch";
    case ErrorCode::InvalidArtifact: return "InvalidArtifact";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::ModelNotLoaded: return "ModelNotLoaded";
    case ErrorCode::PortInUse: return "PortInUse";
    }
    return "Unknown";
}

} // namespace par
