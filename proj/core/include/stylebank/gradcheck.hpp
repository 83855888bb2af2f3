#pragma once

#include <cstdint>
#include <string>

#include "stylebank/training.hpp"

namespace stylebank {

struct GradCheckConfig {
    int layers = 2;
    int d = 8;
    int heads = 2;
    int mlp_ratio = 2;
    int patch_size = 8;
    int image_size = 16;
    int entries = 6;       // bank N
    int n_select = 2;      // bank n
    int tokens_per_entry = 1;
    InsertionMode mode = InsertionMode::deep;
    int batch = 2;
    double lambda = 0.5;
    double margin = 0.2;
    double step = 1e-5;       // central difference h
    double threshold = 1e-4;  // max relative error allowed
    uint64_t seed = 7;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    size_t scalars_checked = 0;
    double elapsed_s = 0.0;
    bool pass = false;
    std::string worst_location;
};

/// Central finite differences of the joint loss against the analytic gradients,
/// over every trainable scalar in the bank (selected or not). The differenced
/// path re-runs the full loss including the lookup, so selection stability is
/// part of what gets checked.
GradCheckResult gradient_check(const GradCheckConfig& cfg);

}  // namespace stylebank
