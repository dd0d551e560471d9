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

#include "par/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "par/error.hpp"
#include "par/random.hpp"

namespace par {
namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::DiskFull, "short write to " + path.string());
}

// RFC 4180 record splitting: quoted fields may hold commas, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            if (field_started || !field.empty() || !row.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            field_started = false;
            break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::MalformedManifest, "unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::uint8_t parse_bit(const std::string& cell, const std::string& sample_id, const std::string& attr) {
    const auto v = trim(cell);
    if (v == "0") return 0;
    if (v == "1") return 1;
    throw Error(ErrorCode::MalformedManifest,
                "sample '" + sample_id + "': attribute '" + attr + "' has non-binary value '" + v + "'");
}

} // namespace

AttributeSchema::AttributeSchema(std::vector<AttributeGroup> groups) : groups_(std::move(groups)) {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (groups_[g].name.empty()) throw Error(ErrorCode::MalformedManifest, "attribute group with empty name");
        for (const auto& name : groups_[g].attributes) {
            if (name.empty()) throw Error(ErrorCode::MalformedManifest, "empty attribute name in group " + groups_[g].name);
            if (!lookup_.emplace(name, names_.size()).second)
                throw Error(ErrorCode::MalformedManifest, "duplicate attribute name '" + name + "'");
            names_.push_back(name);
            group_index_.push_back(g);
        }
    }
    if (names_.empty()) throw Error(ErrorCode::MissingSchema, "schema declares no attributes");
}

AttributeSchema AttributeSchema::flat(std::vector<std::string> attributes) {
    return AttributeSchema({AttributeGroup{"attributes", std::move(attributes)}});
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view name) const {
    const auto it = lookup_.find(std::string(name));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

json AttributeSchema::to_json() const {
    json groups = json::array();
    for (const auto& g : groups_) groups.push_back({{"name", g.name}, {"attributes", g.attributes}});
    return json{{"groups", std::move(groups)}};
}

AttributeSchema AttributeSchema::from_json(const json& j) {
    if (!j.is_object() || !j.contains("groups") || !j["groups"].is_array())
        throw Error(ErrorCode::MissingSchema, "schema object needs a 'groups' array");
    std::vector<AttributeGroup> groups;
    try {
        for (const auto& g : j["groups"])
            groups.push_back({g.at("name").get<std::string>(), g.at("attributes").get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedManifest, std::string("bad schema group: ") + e.what());
    }
    return AttributeSchema(std::move(groups));
}

AttributeSchema reference_schema() {
    return AttributeSchema({
        {"upper_body_color", {"upper_black", "upper_white", "upper_red", "upper_blue", "upper_other_color"}},
        {"lower_body_color", {"lower_black", "lower_blue", "lower_other_color"}},
        {"upper_body_type", {"upper_shirt", "upper_tshirt", "upper_jacket", "upper_kurta"}},
        {"lower_body_type", {"lower_trousers", "lower_jeans", "lower_shorts", "lower_saree_skirt"}},
        {"sleeve_length", {"sleeve_long", "sleeve_short"}},
        {"accessories", {"carry_backpack", "carry_bag"}},
        {"footwear", {"footwear_shoes", "footwear_sandals", "footwear_slippers"}},
        {"headgear", {"headgear_cap", "headgear_helmet"}},
        {"pose", {"pose_standing", "pose_sitting"}},
        {"view", {"view_front", "view_back", "view_side"}},
    });
}

AttributeSchema load_schema(const std::filesystem::path& path) {
    const auto text = read_text(path);
    try {
        return AttributeSchema::from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MissingSchema, path.string() + ": " + e.what());
    }
}

void save_schema(const AttributeSchema& schema, const std::filesystem::path& path) {
    write_text(path, schema.to_json().dump(2) + "\n");
}

std::filesystem::path DatasetManifest::resolve_image(const LabeledSample& sample) const {
    std::filesystem::path p(sample.image_path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

bool DatasetManifest::has_replicas() const {
    return std::any_of(samples.begin(), samples.end(), [](const auto& s) { return !s.parent_id.empty(); });
}

void validate_manifest(const DatasetManifest& manifest, bool check_images) {
    if (manifest.schema.empty()) throw Error(ErrorCode::MissingSchema, "manifest has no schema");
    std::unordered_set<std::string> seen;
    for (const auto& s : manifest.samples) {
        if (s.sample_id.empty()) throw Error(ErrorCode::MalformedManifest, "empty sample_id");
        if (!seen.insert(s.sample_id).second) throw Error(ErrorCode::DuplicateSampleId, s.sample_id);
        if (s.labels.size() != manifest.schema.size())
            throw Error(ErrorCode::ShapeMismatch, "sample '" + s.sample_id + "' has " + std::to_string(s.labels.size()) +
                                                      " labels, schema has " + std::to_string(manifest.schema.size()));
        for (auto v : s.labels)
            if (v > 1) throw Error(ErrorCode::NonBinaryTarget, "sample '" + s.sample_id + "'");
        if (check_images) {
            std::error_code ec;
            const auto p = manifest.resolve_image(s);
            if (!std::filesystem::is_regular_file(p, ec))
                throw Error(ErrorCode::MissingImage, "sample '" + s.sample_id + "': " + p.string());
        }
    }
}

DatasetManifest parse_manifest_csv(std::string_view text, const ManifestOptions& options) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::MissingSchema, "CSV manifest has no header row");
    const auto& header = rows.front();
    if (header.size() < 2 || trim(header[0]) != "sample_id" || trim(header[1]) != "image_path")
        throw Error(ErrorCode::MissingSchema, "CSV header must start with sample_id,image_path");

    std::size_t col = 2;
    std::optional<std::size_t> parent_col, replica_col;
    if (col < header.size() && trim(header[col]) == "parent_id") parent_col = col++;
    if (col < header.size() && trim(header[col]) == "replica_index") replica_col = col++;

    std::vector<std::string> header_attrs;
    for (std::size_t c = col; c < header.size(); ++c) header_attrs.push_back(trim(header[c]));
    if (header_attrs.empty()) throw Error(ErrorCode::MissingSchema, "CSV header declares no attribute columns");

    DatasetManifest manifest;
    // column -> schema index
    std::vector<std::size_t> target(header_attrs.size());
    if (options.schema) {
        manifest.schema = *options.schema;
        std::vector<bool> covered(manifest.schema.size(), false);
        for (std::size_t k = 0; k < header_attrs.size(); ++k) {
            const auto idx = manifest.schema.index_of(header_attrs[k]);
            if (!idx) throw Error(ErrorCode::UnknownAttribute, "column '" + header_attrs[k] + "' is not in the schema");
            if (covered[*idx]) throw Error(ErrorCode::MalformedManifest, "duplicate column '" + header_attrs[k] + "'");
            covered[*idx] = true;
            target[k] = *idx;
        }
        for (std::size_t j = 0; j < covered.size(); ++j)
            if (!covered[j])
                throw Error(ErrorCode::MalformedManifest, "schema attribute '" + manifest.schema.attribute(j) + "' has no column");
    } else {
        manifest.schema = AttributeSchema::flat(header_attrs);
        for (std::size_t k = 0; k < target.size(); ++k) target[k] = k;
    }

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        if (row.size() != header.size())
            throw Error(ErrorCode::MalformedManifest, "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                                          " cells, header has " + std::to_string(header.size()));
        LabeledSample s;
        s.sample_id = trim(row[0]);
        s.image_path = trim(row[1]);
        if (parent_col) s.parent_id = trim(row[*parent_col]);
        if (replica_col) {
            const auto v = trim(row[*replica_col]);
            auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s.replica_index);
            if (ec != std::errc{} || ptr != v.data() + v.size() || s.replica_index < 0)
                throw Error(ErrorCode::MalformedManifest, "bad replica_index '" + v + "' in row " + std::to_string(r + 1));
        }
        s.labels.assign(manifest.schema.size(), 0);
        for (std::size_t k = 0; k < header_attrs.size(); ++k)
            s.labels[target[k]] = parse_bit(row[col + k], s.sample_id, header_attrs[k]);
        manifest.samples.push_back(std::move(s));
    }
    validate_manifest(manifest, false);
    return manifest;
}

DatasetManifest parse_manifest_json(std::string_view text, const ManifestOptions& options) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedManifest, e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::MalformedManifest, "JSON manifest must be an object");

    DatasetManifest manifest;
    if (options.schema) {
        manifest.schema = *options.schema;
    } else if (doc.contains("schema")) {
        manifest.schema = AttributeSchema::from_json(doc["schema"]);
    } else {
        throw Error(ErrorCode::MissingSchema, "JSON manifest has no 'schema' block");
    }
    manifest.source_tag = doc.value("source_tag", std::string{});

    const auto L = manifest.schema.size();
    if (doc.contains("samples")) {
        if (!doc["samples"].is_array()) throw Error(ErrorCode::MalformedManifest, "'samples' must be an array");
        for (const auto& item : doc["samples"]) {
            LabeledSample s;
            try {
                s.sample_id = item.at("sample_id").get<std::string>();
                s.image_path = item.at("image_path").get<std::string>();
                s.parent_id = item.value("parent_id", std::string{});
                s.replica_index = item.value("replica_index", 0);
            } catch (const json::exception& e) {
                throw Error(ErrorCode::MalformedManifest, e.what());
            }
            if (item.contains("labels")) {
                const auto& labels = item["labels"];
                if (!labels.is_array() || labels.size() != L)
                    throw Error(ErrorCode::ShapeMismatch, "sample '" + s.sample_id + "': labels must be an array of " +
                                                              std::to_string(L) + " bits");
                for (const auto& v : labels) {
                    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1))
                        throw Error(ErrorCode::MalformedManifest, "sample '" + s.sample_id + "': non-binary label " + v.dump());
                    s.labels.push_back(static_cast<std::uint8_t>(v.get<int>()));
                }
            } else if (item.contains("attributes")) {
                s.labels.assign(L, 0);
                for (const auto& name : item["attributes"]) {
                    const auto n = name.get<std::string>();
                    const auto idx = manifest.schema.index_of(n);
                    if (!idx) throw Error(ErrorCode::UnknownAttribute, "sample '" + s.sample_id + "': '" + n + "'");
                    s.labels[*idx] = 1;
                }
            } else {
                throw Error(ErrorCode::MalformedManifest, "sample '" + s.sample_id + "' has neither labels nor attributes");
            }
            manifest.samples.push_back(std::move(s));
        }
    }
    validate_manifest(manifest, false);
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoError, "manifest not found: " + path.string());
    const auto text = read_text(path);
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    DatasetManifest manifest = ext == ".json" ? parse_manifest_json(text, options) : parse_manifest_csv(text, options);
    if (manifest.source_tag.empty()) manifest.source_tag = path.stem().string();
    manifest.base_dir = path.parent_path();
    validate_manifest(manifest, options.validate_images);
    return manifest;
}

std::string manifest_to_csv(const DatasetManifest& manifest) {
    const bool provenance = manifest.has_replicas();
    std::string out = "sample_id,image_path";
    if (provenance) out += ",parent_id,replica_index";
    for (const auto& name : manifest.schema.attribute_names()) out += "," + csv_field(name);
    out += "\n";
    for (const auto& s : manifest.samples) {
        out += csv_field(s.sample_id) + "," + csv_field(s.image_path);
        if (provenance) out += "," + csv_field(s.parent_id) + "," + std::to_string(s.replica_index);
        for (auto v : s.labels) out += v ? ",1" : ",0";
        out += "\n";
    }
    return out;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
    json samples = json::array();
    for (const auto& s : manifest.samples) {
        json item{{"sample_id", s.sample_id}, {"image_path", s.image_path}};
        if (!s.parent_id.empty()) {
            item["parent_id"] = s.parent_id;
            item["replica_index"] = s.replica_index;
        }
        json labels = json::array();
        for (auto v : s.labels) labels.push_back(static_cast<int>(v));
        item["labels"] = std::move(labels);
        samples.push_back(std::move(item));
    }
    json doc{{"source_tag", manifest.source_tag}, {"schema", manifest.schema.to_json()}, {"samples", std::move(samples)}};
    return doc.dump(2) + "\n";
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    const bool as_json = path.extension() == ".json";
    write_text(path, as_json ? manifest_to_json(manifest) : manifest_to_csv(manifest));
}

SplitResult split_dataset(const DatasetManifest& manifest, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in (0, 1)");

    // Group replicas under their source image; groups keep manifest order.
    std::vector<std::string> keys;
    std::unordered_map<std::string, std::vector<std::string>> members;
    for (const auto& s : manifest.samples) {
        const auto& key = s.parent_id.empty() ? s.sample_id : s.parent_id;
        auto [it, inserted] = members.try_emplace(key);
        if (inserted) keys.push_back(key);
        it->second.push_back(s.sample_id);
    }
    const std::size_t n = keys.size();
    if (n < 2) throw Error(ErrorCode::DegenerateSplit, "need at least 2 source images, got " + std::to_string(n));

    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n) + 0.5));
    if (n_val == 0 || n_val >= n)
        throw Error(ErrorCode::DegenerateSplit, "val_fraction " + std::to_string(val_fraction) + " of " +
                                                    std::to_string(n) + " images leaves one side empty");

    Rng rng(seed);
    rng.shuffle(std::span<std::string>(keys));

    SplitResult result;
    result.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        auto& side = i < n - n_val ? result.train : result.val;
        for (const auto& id : members[keys[i]]) side.push_back(id);
    }
    return result;
}

DatasetManifest select_samples(const DatasetManifest& manifest, std::span<const std::string> ids) {
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) index.emplace(manifest.samples[i].sample_id, i);
    DatasetManifest out;
    out.schema = manifest.schema;
    out.source_tag = manifest.source_tag;
    out.base_dir = manifest.base_dir;
    out.samples.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = index.find(id);
        if (it == index.end()) throw Error(ErrorCode::InvalidArgument, "unknown sample_id '" + id + "'");
        out.samples.push_back(manifest.samples[it->second]);
    }
    return out;
}

std::vector<double> positive_ratios(std::span<const LabeledSample> samples, const AttributeSchema& schema) {
    if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "positive_ratios needs at least one sample");
    const auto L = schema.size();
    std::vector<std::size_t> counts(L, 0);
    for (const auto& s : samples) {
        if (s.labels.size() != L) throw Error(ErrorCode::ShapeMismatch, "sample '" + s.sample_id + "' label width");
        for (std::size_t j = 0; j < L; ++j) counts[j] += s.labels[j] ? 1 : 0;
    }
    std::vector<double> r(L);
    const auto n = static_cast<double>(samples.size());
    for (std::size_t j = 0; j < L; ++j) r[j] = static_cast<double>(counts[j]) / n;
    return r;
}

} // namespace par
