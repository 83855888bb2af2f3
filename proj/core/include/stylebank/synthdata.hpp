#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "stylebank/common.hpp"
#include "stylebank/hash.hpp"

namespace stylebank {

struct SynthImage {
    int height = 32;
    int width = 32;
    int channels = 3;
    std::vector<double> pixels;  // H x W x C row-major, values in [0, 1]
    int class_id = 0;
    int instance_id = 0;
    StyleTag style = StyleTag::natural;

    double& px(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }
    double px(int y, int x, int c) const { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }
};

struct SynthText {
    std::vector<uint32_t> tokens;  // zero-padded to kMaxTextLen; id 0 is the pad symbol
    int length = 0;                // non-pad prefix length
    int class_id = 0;
    int instance_id = 0;
};

inline constexpr int kMaxTextLen = 20;
inline constexpr int kDefaultVocabSize = 64;

struct QuerySample {
    Modality modality = Modality::image;
    StyleTag style = StyleTag::natural;
    int class_id = 0;
    int instance_id = 0;
    SynthImage image;  // valid when modality == image
    SynthText text;    // valid when modality == text
};

struct DatasetManifest {
    int format_version = 1;
    int num_classes = 0;
    int instances_per_class = 0;
    uint64_t seed = 0;
    double split_fraction = 0.0;
    std::vector<StyleTag> styles_present;
    std::vector<int> train_instances;
    std::vector<int> test_instances;

    struct Entry {
        int class_id = 0;
        int instance_id = 0;
        StyleTag style = StyleTag::natural;
        Modality modality = Modality::image;
        std::string file;
    };
    std::vector<Entry> samples;

    bool is_train_instance(int instance_id) const;
};

struct GenerateConfig {
    int num_classes = 16;
    int instances_per_class = 8;
    uint64_t seed = 42;
    double split_fraction = 0.75;
};

// Discrete attribute codes behind one (class, instance) pair. Instance
// attributes mix in the class id so every code value is seen in training
// while held-out pairs remain unseen combinations.
struct SampleAttributes {
    int shape = 0;   // polygon family, 0..3 -> 3..6 sides
    int star = 0;    // 0 convex, 1 star
    int big = 0;     // 0 small, 1 large
    int hue = 0;     // 0..15 palette index
    int pos = 0;     // 0..M-1 placement angle
    int rot = 0;     // 0..M-1 orientation step
};
SampleAttributes sample_attributes(int class_id, int instance_id, int instances_per_class);

SynthImage render_natural_image(int class_id, int instance_id, int instances_per_class,
                                int image_size = 32);
SynthImage apply_style(const SynthImage& image, StyleTag style, uint64_t seed);
SynthText render_text(int class_id, int instance_id, int vocab_size,
                      int num_classes, int instances_per_class);

DatasetManifest generate_dataset(const GenerateConfig& config, const std::filesystem::path& out_dir);

// Fully materialized dataset (desk scale keeps everything in memory).
struct Dataset {
    DatasetManifest manifest;
    std::map<std::tuple<int, int, StyleTag>, SynthImage> images;
    std::map<std::pair<int, int>, SynthText> texts;

    const SynthImage& image(int class_id, int instance_id, StyleTag style) const;
    const SynthText& text(int class_id, int instance_id) const;
    QuerySample sample(int class_id, int instance_id, StyleTag style) const;

    // (class, instance) pairs in one split, ordered.
    std::vector<std::pair<int, int>> split_pairs(bool train) const;
};

Dataset load_dataset(const std::filesystem::path& dir);

// SHA-256 of manifest.json, pinned into index provenance.
Digest dataset_manifest_hash(const std::filesystem::path& dataset_dir);

}  // namespace stylebank
