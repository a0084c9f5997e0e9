#pragma once

#include <filesystem>

#include "dynsdf/neural_field.hpp"

namespace dynsdf {

/// Versioned little-endian blob holding the octree (geometry and vertex
/// embeddings), the Fourier matrix and the decoder weights.
void save_checkpoint(const NeuralField& field, const std::filesystem::path& path);
NeuralField load_checkpoint(const std::filesystem::path& path);

}  // namespace dynsdf
