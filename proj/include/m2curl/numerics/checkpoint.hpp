#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "m2curl/numerics/parameter.hpp"

namespace m2curl {

/// Checkpoint on disk: `<stem>.json` manifest (names, shapes, byte offsets)
/// next to `<stem>.bin`, a blob of little-endian 32-bit floats in manifest order.
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct Checkpoint {
    std::vector<CheckpointEntry> entries;
    nlohmann::json metadata = nlohmann::json::object();

    template <typename T>
    static Checkpoint from_params(const ConstParamRefs<T>& params) {
        Checkpoint ck;
        for (const auto* p : params) {
            CheckpointEntry e{p->name, p->value.shape(), {}};
            e.values.reserve(p->value.size());
            for (T v : p->value.data()) e.values.push_back(static_cast<float>(v));
            ck.entries.push_back(std::move(e));
        }
        return ck;
    }

    /// Loads values by name; every parameter must be present with a matching shape.
    template <typename T>
    void into_params(const ParamRefs<T>& params) const {
        std::map<std::string, const CheckpointEntry*> by_name;
        for (const auto& e : entries) by_name[e.name] = &e;
        for (auto* p : params) {
            auto it = by_name.find(p->name);
            if (it == by_name.end()) throw ParseError("checkpoint is missing parameter " + p->name);
            if (it->second->shape != p->value.shape()) {
                throw ParseError("checkpoint shape " + shape_str(it->second->shape) + " for " + p->name +
                                 " does not match model shape " + shape_str(p->value.shape()));
            }
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                p->value[i] = static_cast<T>(it->second->values[i]);
            }
        }
    }
};

namespace detail {

inline void put_f32_le(std::vector<char>& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

inline float get_f32_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
    return std::bit_cast<float>(bits);
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& stem) {
    nlohmann::json manifest;
    manifest["format"] = "m2curl-checkpoint";
    manifest["version"] = 1;
    manifest["dtype"] = "f32le";
    manifest["blob"] = stem.filename().string() + ".bin";
    manifest["metadata"] = ck.metadata;
    std::vector<char> blob;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : ck.entries) {
        if (shape_size(e.shape) != e.values.size()) {
            throw ContractError("checkpoint entry " + e.name + " has inconsistent size");
        }
        list.push_back({{"name", e.name},
                        {"shape", e.shape},
                        {"offset", blob.size()},
                        {"count", e.values.size()}});
        for (float v : e.values) detail::put_f32_le(blob, v);
    }
    manifest["params"] = std::move(list);

    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    std::ofstream js(stem.string() + ".json", std::ios::binary);
    js << manifest.dump(2) << '\n';
    std::ofstream bin(stem.string() + ".bin", std::ios::binary);
    bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!js || !bin) throw std::runtime_error("failed to write checkpoint " + stem.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& stem) {
    std::ifstream js(stem.string() + ".json");
    if (!js) throw ParseError("cannot open checkpoint manifest " + stem.string() + ".json");
    nlohmann::json manifest;
    try {
        js >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed checkpoint manifest: ") + e.what());
    }
    if (manifest.value("dtype", "") != "f32le") throw ParseError("unsupported checkpoint dtype");
    const auto blob_path = stem.parent_path() / manifest.at("blob").get<std::string>();
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw ParseError("cannot open checkpoint blob " + blob_path.string());
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    Checkpoint ck;
    ck.metadata = manifest.value("metadata", nlohmann::json::object());
    for (const auto& p : manifest.at("params")) {
        CheckpointEntry e;
        e.name = p.at("name").get<std::string>();
        e.shape = p.at("shape").get<Shape>();
        const auto offset = p.at("offset").get<std::size_t>();
        const auto count = p.at("count").get<std::size_t>();
        if (count != shape_size(e.shape) || offset + 4 * count > blob.size()) {
            throw ParseError("checkpoint entry " + e.name + " out of range of blob");
        }
        e.values.resize(count);
        for (std::size_t i = 0; i < count; ++i) e.values[i] = detail::get_f32_le(blob.data() + offset + 4 * i);
        ck.entries.push_back(std::move(e));
    }
    return ck;
}

}  // namespace m2curl
