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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace par {

struct AttributeGroup {
    std::string name;
    std::vector<std::string> attributes;

    bool operator==(const AttributeGroup&) const = default;
};

/// Ordered attribute vocabulary. Attribute j of the flattened group list is
/// position j of every label vector.
class AttributeSchema {
public:
    AttributeSchema() = default;
    /// Throws MalformedManifest on duplicate names, empty names or L == 0.
    explicit AttributeSchema(std::vector<AttributeGroup> groups);

    /// Single group named "attributes".
    static AttributeSchema flat(std::vector<std::string> attributes);

    [[nodiscard]] const std::vector<AttributeGroup>& groups() const noexcept { return groups_; }
    [[nodiscard]] std::size_t size() const noexcept { return names_.size(); }
    [[nodiscard]] bool empty() const noexcept { return names_.empty(); }
    [[nodiscard]] const std::vector<std::string>& attribute_names() const noexcept { return names_; }
    [[nodiscard]] const std::string& attribute(std::size_t j) const { return names_.at(j); }
    [[nodiscard]] const std::string& group_of(std::size_t j) const { return groups_.at(group_index_.at(j)).name; }
    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static AttributeSchema from_json(const nlohmann::json& j);

    bool operator==(const AttributeSchema& other) const { return groups_ == other.groups_; }

private:
    std::vector<AttributeGroup> groups_;
    std::vector<std::string> names_;
    std::vector<std::size_t> group_index_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

/// Illustrative vocabulary covering clothing color and type, sleeve length,
/// carried accessories, footwear, headgear, pose and view. Real datasets
/// override it through the manifest header.
AttributeSchema reference_schema();

AttributeSchema load_schema(const std::filesystem::path& path);
void save_schema(const AttributeSchema& schema, const std::filesystem::path& path);

struct LabeledSample {
    std::string sample_id;
    std::string image_path;           // as written in the manifest
    std::vector<std::uint8_t> labels; // multi-hot, schema order
    std::string parent_id;            // set on augmentation replicas
    int replica_index = 0;            // 0 for source images

    bool operator==(const LabeledSample&) const = default;
};

struct DatasetManifest {
    AttributeSchema schema;
    std::vector<LabeledSample> samples;
    std::string source_tag;
    std::filesystem::path base_dir; // relative image paths resolve against this

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] std::filesystem::path resolve_image(const LabeledSample& sample) const;
    [[nodiscard]] bool has_replicas() const;
};

struct ManifestOptions {
    /// Overrides (or supplies) the schema. CSV headers are then checked against it.
    std::optional<AttributeSchema> schema;
    bool validate_images = true;
};

/// CSV (`sample_id,image_path[,parent_id,replica_index],<attr>...`) or JSON
/// (`{"schema":…, "samples":[…]}`), chosen by file extension.
DatasetManifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});

DatasetManifest parse_manifest_csv(std::string_view text, const ManifestOptions& options = {});
DatasetManifest parse_manifest_json(std::string_view text, const ManifestOptions& options = {});

std::string manifest_to_csv(const DatasetManifest& manifest);
std::string manifest_to_json(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Checks ids, label widths and (optionally) image existence. Throws on the first violation.
void validate_manifest(const DatasetManifest& manifest, bool check_images);

struct SplitResult {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::uint64_t seed = 0;

    bool operator==(const SplitResult&) const = default;
};

/// Seeded shuffle of source images, last round(val_fraction * N) to validation
/// (ties go to validation). Replicas follow their parent, so no augmented copy
/// of a validation image lands in training.
SplitResult split_dataset(const DatasetManifest& manifest, double val_fraction, std::uint64_t seed);

/// Samples of `manifest` whose ids are listed, in list order.
DatasetManifest select_samples(const DatasetManifest& manifest, std::span<const std::string> ids);

/// Fraction of samples carrying each attribute.
std::vector<double> positive_ratios(std::span<const LabeledSample> samples, const AttributeSchema& schema);

} // namespace par
