#pragma once

#include "aroma/io/dataset.hpp"
#include "aroma/nn/params.hpp"

#include <string>
#include <vector>

namespace aroma::io {

/// Language-neutral named-tensor archive: manifest.json describing tensor
/// names/shapes/offsets plus weights.bin holding concatenated little-endian
/// float32 blobs.
struct CheckpointArchive {
    static void save(const std::string& dir, const std::vector<const nn::ParamStore*>& stores,
                     const json& config);

    static json load_config(const std::string& dir);

    /// Fill the stores' tensors by name; every tensor of every store must be
    /// present with a matching shape.
    static void load_into(const std::string& dir, const std::vector<nn::ParamStore*>& stores);

    /// Concatenated raw bytes of all archived tensors whose name starts with
    /// `prefix`, in manifest order (for freeze checks).
    static std::vector<unsigned char> tensor_bytes(const std::string& dir,
                                                   const std::string& prefix);
};

}  // namespace aroma::io
