#pragma once

#include <filesystem>
#include <memory>

#include "gpnd/model.hpp"

namespace gpnd {

inline constexpr int kModelFormatVersion = 1;

// Versioned JSON model record: backend id, unconstrained parameters,
// standardization constants, the (standardized) training set for the exact
// backend and the variational state for the sparse one. Written via a
// temporary file and rename so a failed run never leaves a partial file.
void save_model(const Model& model, const std::filesystem::path& path);

// Loaded sparse models carry no training data; they serve predictions only.
std::unique_ptr<Model> load_model(const std::filesystem::path& path);

}  // namespace gpnd
