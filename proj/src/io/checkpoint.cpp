#include "aroma/io/checkpoint.hpp"

#include <filesystem>
#include <fstream>

namespace aroma::io {

namespace fs = std::filesystem;

void CheckpointArchive::save(const std::string& dir,
                             const std::vector<const nn::ParamStore*>& stores,
                             const json& config) {
    fs::create_directories(dir);
    json tensors = json::array();
    std::vector<float> blob;
    int64_t offset = 0;
    for (const nn::ParamStore* store : stores) {
        for (const auto& info : store->infos()) {
            const int64_t count = info.rows * info.cols;
            tensors.push_back(json{{"name", info.name},
                                   {"shape", {info.rows, info.cols}},
                                   {"dtype", "float32"},
                                   {"offset_bytes", offset * static_cast<int64_t>(sizeof(float))},
                                   {"nbytes", count * static_cast<int64_t>(sizeof(float))}});
            const double* src = store->flat().data() + info.offset;
            for (int64_t i = 0; i < count; ++i) blob.push_back(static_cast<float>(src[i]));
            offset += count;
        }
    }
    {
        std::ofstream out(dir + "/weights.bin", std::ios::binary | std::ios::trunc);
        if (!out) throw Error("IoError", "cannot open " + dir + "/weights.bin");
        out.write(reinterpret_cast<const char*>(blob.data()),
                  static_cast<std::streamsize>(blob.size() * sizeof(float)));
    }
    write_json_atomic(dir + "/manifest.json",
                      json{{"format", "aroma-checkpoint-v1"},
                           {"tensors", tensors},
                           {"config", config}});
}

json CheckpointArchive::load_config(const std::string& dir) {
    if (!fs::exists(dir + "/manifest.json"))
        throw Error("DependencyError", "no checkpoint at " + dir);
    return read_json(dir + "/manifest.json").at("config");
}

namespace {

std::vector<float> read_weights(const std::string& dir) {
    const std::string path = dir + "/weights.bin";
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error("DependencyError", "no checkpoint weights at " + path);
    const int64_t bytes = static_cast<int64_t>(in.tellg());
    std::vector<float> blob(static_cast<size_t>(bytes) / sizeof(float));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(blob.data()), bytes);
    if (!in) throw Error("IoError", "short read from " + path);
    return blob;
}

}  // namespace

void CheckpointArchive::load_into(const std::string& dir,
                                  const std::vector<nn::ParamStore*>& stores) {
    if (!fs::exists(dir + "/manifest.json"))
        throw Error("DependencyError", "no checkpoint at " + dir);
    const json manifest = read_json(dir + "/manifest.json");
    const std::vector<float> blob = read_weights(dir);

    for (nn::ParamStore* store : stores) {
        for (const auto& info : store->infos()) {
            const json* entry = nullptr;
            for (const auto& t : manifest.at("tensors"))
                if (t.at("name") == info.name) {
                    entry = &t;
                    break;
                }
            if (!entry)
                throw Error("DependencyError", "checkpoint is missing tensor " + info.name);
            const auto shape = entry->at("shape").get<std::vector<int64_t>>();
            if (shape != std::vector<int64_t>{info.rows, info.cols})
                throw Error("ShapeMismatch", "tensor " + info.name + " shape mismatch");
            const int64_t off = entry->at("offset_bytes").get<int64_t>() /
                                static_cast<int64_t>(sizeof(float));
            const int64_t count = info.rows * info.cols;
            if (off + count > static_cast<int64_t>(blob.size()))
                throw Error("IoError", "weights.bin too short for tensor " + info.name);
            double* dst = store->flat().data() + info.offset;
            for (int64_t i = 0; i < count; ++i)
                dst[i] = static_cast<double>(blob[static_cast<size_t>(off + i)]);
        }
    }
}

std::vector<unsigned char> CheckpointArchive::tensor_bytes(const std::string& dir,
                                                           const std::string& prefix) {
    const json manifest = read_json(dir + "/manifest.json");
    std::ifstream in(dir + "/weights.bin", std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + dir + "/weights.bin");
    std::vector<unsigned char> out;
    for (const auto& t : manifest.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        if (name.rfind(prefix, 0) != 0) continue;
        const int64_t off = t.at("offset_bytes").get<int64_t>();
        const int64_t nbytes = t.at("nbytes").get<int64_t>();
        std::vector<unsigned char> buf(static_cast<size_t>(nbytes));
        in.seekg(off);
        in.read(reinterpret_cast<char*>(buf.data()), nbytes);
        out.insert(out.end(), buf.begin(), buf.end());
    }
    return out;
}

}  // namespace aroma::io
