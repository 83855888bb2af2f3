#include "stylebank/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stylebank/io.hpp"

namespace stylebank {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Token id layout. Id 0 is reserved for padding.
constexpr uint32_t kShapeBase = 1;   // 4 values
constexpr uint32_t kStarBase = 5;    // 2 values
constexpr uint32_t kSizeBase = 7;    // 2 values
constexpr uint32_t kHueBase = 9;     // 16 values
constexpr uint32_t kPosBase = 25;    // up to 12 values
constexpr uint32_t kRotBase = 37;    // up to 12 values
constexpr int kMaxClasses = 16;
constexpr int kMaxInstances = 12;

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    rgb[0] = r + m;
    rgb[1] = g + m;
    rgb[2] = b + m;
}

// Even-odd rule point-in-polygon.
bool inside_polygon(const std::vector<std::pair<double, double>>& poly, double x, double y) {
    bool inside = false;
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto [xi, yi] = poly[i];
        const auto [xj, yj] = poly[j];
        if ((yi > y) != (yj > y)) {
            const double t = (y - yi) / (yj - yi);
            if (x < xi + t * (xj - xi)) inside = !inside;
        }
    }
    return inside;
}

double gray_at(const SynthImage& im, int y, int x) {
    return 0.299 * im.px(y, x, 0) + 0.587 * im.px(y, x, 1) + 0.114 * im.px(y, x, 2);
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::string sample_filename(int class_id, int instance_id, StyleTag style) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "c%03d_i%03d_%s.bin", class_id, instance_id, to_string(style));
    return buf;
}

}  // namespace

bool DatasetManifest::is_train_instance(int instance_id) const {
    return std::find(train_instances.begin(), train_instances.end(), instance_id) !=
           train_instances.end();
}

SampleAttributes sample_attributes(int class_id, int instance_id, int instances_per_class) {
    SampleAttributes a;
    a.shape = class_id % 4;
    a.star = (class_id / 4) % 2;
    a.big = (class_id / 8) % 2;
    a.hue = class_id % 16;
    a.pos = (instance_id + class_id) % instances_per_class;
    a.rot = (instance_id + 3 * class_id) % instances_per_class;
    return a;
}

SynthImage render_natural_image(int class_id, int instance_id, int instances_per_class,
                                int image_size) {
    const SampleAttributes a = sample_attributes(class_id, instance_id, instances_per_class);
    const int S = image_size;
    SynthImage im;
    im.height = S;
    im.width = S;
    im.channels = 3;
    im.pixels.assign(static_cast<size_t>(S) * S * 3, 0.12);
    im.class_id = class_id;
    im.instance_id = instance_id;
    im.style = StyleTag::natural;

    const double scale = S / 32.0;
    const int sides = 3 + a.shape;
    const double radius = (a.big ? 9.0 : 6.0) * scale;
    const double place_angle = 2.0 * kPi * a.pos / instances_per_class;
    const double cx = S / 2.0 + 6.0 * scale * std::cos(place_angle);
    const double cy = S / 2.0 + 6.0 * scale * std::sin(place_angle);
    const double rot_angle = kPi * a.rot / instances_per_class;

    std::vector<std::pair<double, double>> poly;
    if (a.star) {
        for (int k = 0; k < 2 * sides; ++k) {
            const double r = (k % 2 == 0) ? radius : 0.45 * radius;
            const double ang = rot_angle + kPi * k / sides;
            poly.emplace_back(cx + r * std::cos(ang), cy + r * std::sin(ang));
        }
    } else {
        for (int k = 0; k < sides; ++k) {
            const double ang = rot_angle + 2.0 * kPi * k / sides;
            poly.emplace_back(cx + radius * std::cos(ang), cy + radius * std::sin(ang));
        }
    }

    double fill[3];
    hsv_to_rgb(a.hue / 16.0, 0.85, 0.9, fill);

    // Orientation marker: a bright dot past the shape rim, full-circle so the
    // rot code never aliases with polygon symmetry.
    const double marker_angle = 2.0 * kPi * a.rot / instances_per_class;
    double mx = cx + (radius + 3.0 * scale) * std::cos(marker_angle);
    double my = cy + (radius + 3.0 * scale) * std::sin(marker_angle);
    mx = std::min(static_cast<double>(S) - 2.5, std::max(1.5, mx));
    my = std::min(static_cast<double>(S) - 2.5, std::max(1.5, my));
    const double marker_r = 1.6 * scale;

    // 2x2 supersampling keeps edges soft enough for the gradient detector.
    static const double offs[2] = {0.25, 0.75};
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            double acc[3] = {0, 0, 0};
            for (double oy : offs) {
                for (double ox : offs) {
                    const double sx = x + ox;
                    const double sy = y + oy;
                    double c[3] = {0.12, 0.12, 0.12};
                    if (inside_polygon(poly, sx, sy)) {
                        c[0] = fill[0];
                        c[1] = fill[1];
                        c[2] = fill[2];
                    }
                    const double dx = sx - mx;
                    const double dy = sy - my;
                    if (dx * dx + dy * dy <= marker_r * marker_r) {
                        c[0] = c[1] = c[2] = 0.98;
                    }
                    acc[0] += c[0];
                    acc[1] += c[1];
                    acc[2] += c[2];
                }
            }
            for (int ch = 0; ch < 3; ++ch) im.px(y, x, ch) = acc[ch] / 4.0;
        }
    }
    return im;
}

namespace {

SynthImage sketch_transform(const SynthImage& in) {
    SynthImage out = in;
    const int H = in.height;
    const int W = in.width;
    const double threshold = 0.15;
    auto g = [&](int y, int x) {
        y = std::min(H - 1, std::max(0, y));
        x = std::min(W - 1, std::max(0, x));
        return gray_at(in, y, x);
    };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            // Sobel, normalized to keep magnitudes in [0, ~1].
            const double gx = (g(y - 1, x + 1) + 2 * g(y, x + 1) + g(y + 1, x + 1) -
                               g(y - 1, x - 1) - 2 * g(y, x - 1) - g(y + 1, x - 1)) / 4.0;
            const double gy = (g(y + 1, x - 1) + 2 * g(y + 1, x) + g(y + 1, x + 1) -
                               g(y - 1, x - 1) - 2 * g(y - 1, x) - g(y - 1, x + 1)) / 4.0;
            const double mag = std::sqrt(gx * gx + gy * gy);
            const double v = mag > threshold ? 1.0 : 0.0;
            for (int c = 0; c < 3; ++c) out.px(y, x, c) = v;
        }
    }
    return out;
}

SynthImage lowres_transform(const SynthImage& in, int k) {
    const int H = in.height;
    const int W = in.width;
    SynthImage blurred = in;
    // k x k box blur with clamped borders.
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                int cnt = 0;
                for (int dy = -(k / 2); dy <= (k - 1) / 2; ++dy) {
                    for (int dx = -(k / 2); dx <= (k - 1) / 2; ++dx) {
                        const int yy = std::min(H - 1, std::max(0, y + dy));
                        const int xx = std::min(W - 1, std::max(0, x + dx));
                        acc += in.px(yy, xx, c);
                        ++cnt;
                    }
                }
                blurred.px(y, x, c) = acc / cnt;
            }
        }
    }
    // Area downsample by k, then bilinear upsample back.
    const int h = H / k;
    const int w = W / k;
    std::vector<double> small(static_cast<size_t>(h) * w * 3, 0.0);
    auto sm = [&](int y, int x, int c) -> double& { return small[(static_cast<size_t>(y) * w + x) * 3 + c]; };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) acc += blurred.px(y * k + dy, x * k + dx, c);
                sm(y, x, c) = acc / (k * k);
            }
    SynthImage out = in;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double fy = (y + 0.5) / k - 0.5;
            const double fx = (x + 0.5) / k - 0.5;
            const int y0 = std::min(h - 1, std::max(0, static_cast<int>(std::floor(fy))));
            const int x0 = std::min(w - 1, std::max(0, static_cast<int>(std::floor(fx))));
            const int y1 = std::min(h - 1, y0 + 1);
            const int x1 = std::min(w - 1, x0 + 1);
            const double wy = std::min(1.0, std::max(0.0, fy - y0));
            const double wx = std::min(1.0, std::max(0.0, fx - x0));
            for (int c = 0; c < 3; ++c) {
                const double top = sm(y0, x0, c) * (1 - wx) + sm(y0, x1, c) * wx;
                const double bot = sm(y1, x0, c) * (1 - wx) + sm(y1, x1, c) * wx;
                out.px(y, x, c) = clamp01(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

SynthImage art_transform(const SynthImage& in, uint64_t seed) {
    SynthImage out = in;
    uint64_t state = seed;
    const double fx = (1 + splitmix64(state) % 3) / static_cast<double>(in.width);
    const double fy = (1 + splitmix64(state) % 3) / static_cast<double>(in.height);
    double phase[3];
    for (double& p : phase) p = (splitmix64(state) % 1000) * 2.0 * kPi / 1000.0;
    static const int perm[3] = {1, 2, 0};  // RGB -> GBR, fixed across the corpus
    const double amp = 0.08;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double base = in.px(y, x, perm[c]);
                const double shift = amp * std::sin(2.0 * kPi * (fx * x + fy * y) + phase[c]);
                out.px(y, x, c) = clamp01(base + shift);
            }
    return out;
}

}  // namespace

SynthImage apply_style(const SynthImage& image, StyleTag style, uint64_t seed) {
    if (style == StyleTag::natural || style == StyleTag::text)
        throw std::invalid_argument("apply_style: style must be a non-natural image style");
    SynthImage out;
    switch (style) {
        case StyleTag::sketch: out = sketch_transform(image); break;
        case StyleTag::lowres: out = lowres_transform(image, 4); break;
        case StyleTag::art: out = art_transform(image, seed); break;
        default: throw std::invalid_argument("apply_style: unsupported style");
    }
    out.class_id = image.class_id;
    out.instance_id = image.instance_id;
    out.style = style;
    return out;
}

SynthText render_text(int class_id, int instance_id, int vocab_size,
                      int num_classes, int instances_per_class) {
    if (class_id < 0 || class_id >= num_classes)
        throw std::invalid_argument("render_text: class_id out of range");
    if (instance_id < 0 || instance_id >= instances_per_class)
        throw std::invalid_argument("render_text: instance_id out of range");
    if (vocab_size < static_cast<int>(kRotBase) + instances_per_class)
        throw std::invalid_argument("render_text: vocabulary too small for attribute codes");
    const SampleAttributes a = sample_attributes(class_id, instance_id, instances_per_class);
    SynthText t;
    t.class_id = class_id;
    t.instance_id = instance_id;
    t.tokens = {kShapeBase + static_cast<uint32_t>(a.shape),
                kStarBase + static_cast<uint32_t>(a.star),
                kSizeBase + static_cast<uint32_t>(a.big),
                kHueBase + static_cast<uint32_t>(a.hue),
                kPosBase + static_cast<uint32_t>(a.pos),
                kRotBase + static_cast<uint32_t>(a.rot)};
    t.length = static_cast<int>(t.tokens.size());
    t.tokens.resize(kMaxTextLen, 0);
    return t;
}

namespace {

nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["format_version"] = m.format_version;
    j["num_classes"] = m.num_classes;
    j["instances_per_class"] = m.instances_per_class;
    j["seed"] = m.seed;
    j["split_fraction"] = m.split_fraction;
    nlohmann::json styles = nlohmann::json::array();
    for (StyleTag s : m.styles_present) styles.push_back(to_string(s));
    j["styles_present"] = styles;
    j["split"] = {{"train_instances", m.train_instances}, {"test_instances", m.test_instances}};
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& e : m.samples) {
        samples.push_back({{"class_id", e.class_id},
                           {"instance_id", e.instance_id},
                           {"style", to_string(e.style)},
                           {"modality", to_string(e.modality)},
                           {"file", e.file}});
    }
    j["samples"] = samples;
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1) throw std::runtime_error("unsupported manifest format_version");
    m.num_classes = j.at("num_classes").get<int>();
    m.instances_per_class = j.at("instances_per_class").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.split_fraction = j.at("split_fraction").get<double>();
    for (const auto& s : j.at("styles_present")) m.styles_present.push_back(parse_style(s.get<std::string>()));
    m.train_instances = j.at("split").at("train_instances").get<std::vector<int>>();
    m.test_instances = j.at("split").at("test_instances").get<std::vector<int>>();
    for (const auto& e : j.at("samples")) {
        DatasetManifest::Entry entry;
        entry.class_id = e.at("class_id").get<int>();
        entry.instance_id = e.at("instance_id").get<int>();
        entry.style = parse_style(e.at("style").get<std::string>());
        entry.modality = e.at("modality").get<std::string>() == "image" ? Modality::image : Modality::text;
        entry.file = e.at("file").get<std::string>();
        m.samples.push_back(entry);
    }
    // Split invariants: disjoint and covering all instances.
    std::set<int> seen;
    for (int i : m.train_instances) seen.insert(i);
    for (int i : m.test_instances) {
        if (seen.count(i)) throw std::runtime_error("manifest: train/test splits overlap");
        seen.insert(i);
    }
    if (static_cast<int>(seen.size()) != m.instances_per_class)
        throw std::runtime_error("manifest: splits do not cover all instances");
    return m;
}

}  // namespace

DatasetManifest generate_dataset(const GenerateConfig& config, const std::filesystem::path& out_dir) {
    if (config.num_classes < 2 || config.num_classes > kMaxClasses)
        throw std::invalid_argument("generate_dataset: num_classes must be in [2, 16]");
    if (config.instances_per_class < 2 || config.instances_per_class > kMaxInstances)
        throw std::invalid_argument("generate_dataset: instances_per_class must be in [2, 12]");
    if (!(config.split_fraction > 0.0 && config.split_fraction < 1.0))
        throw std::invalid_argument("generate_dataset: split_fraction must be in (0, 1)");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir))
        throw std::runtime_error("generate_dataset: cannot create output directory " + out_dir.string());

    DatasetManifest m;
    m.num_classes = config.num_classes;
    m.instances_per_class = config.instances_per_class;
    m.seed = config.seed;
    m.split_fraction = config.split_fraction;
    m.styles_present = {StyleTag::natural, StyleTag::sketch, StyleTag::art, StyleTag::lowres,
                        StyleTag::text};

    int train_count = static_cast<int>(std::lround(config.split_fraction * config.instances_per_class));
    train_count = std::min(config.instances_per_class - 1, std::max(1, train_count));
    for (int i = 0; i < config.instances_per_class; ++i)
        (i < train_count ? m.train_instances : m.test_instances).push_back(i);

    const std::vector<StyleTag> image_styles = {StyleTag::natural, StyleTag::sketch, StyleTag::art,
                                                StyleTag::lowres};
    for (int c = 0; c < config.num_classes; ++c) {
        for (int i = 0; i < config.instances_per_class; ++i) {
            const SynthImage natural = render_natural_image(c, i, config.instances_per_class);
            for (StyleTag style : image_styles) {
                SynthImage out;
                if (style == StyleTag::natural) {
                    out = natural;
                } else {
                    const uint64_t sample_seed =
                        derive_seed(config.seed, std::string("style/") + to_string(style) + "/" +
                                                     std::to_string(c) + "/" + std::to_string(i));
                    out = apply_style(natural, style, sample_seed);
                }
                const std::string name = sample_filename(c, i, style);
                write_tensor_f32(out_dir / name,
                                 {static_cast<uint32_t>(out.height), static_cast<uint32_t>(out.width),
                                  static_cast<uint32_t>(out.channels)},
                                 out.pixels);
                m.samples.push_back({c, i, style, Modality::image, name});
            }
            const SynthText text = render_text(c, i, kDefaultVocabSize, config.num_classes,
                                               config.instances_per_class);
            const std::string name = sample_filename(c, i, StyleTag::text);
            write_tensor_u32(out_dir / name, {static_cast<uint32_t>(text.tokens.size())}, text.tokens);
            m.samples.push_back({c, i, StyleTag::text, Modality::text, name});
        }
    }

    std::ofstream mf(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!mf) throw std::runtime_error("generate_dataset: cannot write manifest");
    mf << manifest_to_json(m).dump(2) << "\n";
    return m;
}

const SynthImage& Dataset::image(int class_id, int instance_id, StyleTag style) const {
    auto it = images.find({class_id, instance_id, style});
    if (it == images.end()) throw std::out_of_range("dataset: no such image sample");
    return it->second;
}

const SynthText& Dataset::text(int class_id, int instance_id) const {
    auto it = texts.find({class_id, instance_id});
    if (it == texts.end()) throw std::out_of_range("dataset: no such text sample");
    return it->second;
}

QuerySample Dataset::sample(int class_id, int instance_id, StyleTag style) const {
    QuerySample q;
    q.style = style;
    q.class_id = class_id;
    q.instance_id = instance_id;
    q.modality = modality_of(style);
    if (q.modality == Modality::image)
        q.image = image(class_id, instance_id, style);
    else
        q.text = text(class_id, instance_id);
    return q;
}

std::vector<std::pair<int, int>> Dataset::split_pairs(bool train) const {
    const auto& instances = train ? manifest.train_instances : manifest.test_instances;
    std::vector<std::pair<int, int>> out;
    for (int c = 0; c < manifest.num_classes; ++c)
        for (int i : instances) out.emplace_back(c, i);
    return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json", std::ios::binary);
    if (!mf) throw std::runtime_error("load_dataset: missing manifest.json in " + dir.string());
    nlohmann::json j = nlohmann::json::parse(mf);
    Dataset ds;
    ds.manifest = manifest_from_json(j);
    for (const auto& e : ds.manifest.samples) {
        if (e.modality == Modality::image) {
            std::vector<uint32_t> dims;
            std::vector<double> values;
            read_tensor_f32(dir / e.file, dims, values);
            if (dims.size() != 3) throw std::runtime_error("load_dataset: image tensor rank != 3");
            SynthImage im;
            im.height = static_cast<int>(dims[0]);
            im.width = static_cast<int>(dims[1]);
            im.channels = static_cast<int>(dims[2]);
            im.pixels = std::move(values);
            im.class_id = e.class_id;
            im.instance_id = e.instance_id;
            im.style = e.style;
            ds.images[{e.class_id, e.instance_id, e.style}] = std::move(im);
        } else {
            std::vector<uint32_t> dims;
            std::vector<uint32_t> tokens;
            read_tensor_u32(dir / e.file, dims, tokens);
            if (dims.size() != 1) throw std::runtime_error("load_dataset: text tensor rank != 1");
            SynthText t;
            t.tokens = std::move(tokens);
            t.length = 0;
            for (uint32_t id : t.tokens)
                if (id != 0) ++t.length;
            t.class_id = e.class_id;
            t.instance_id = e.instance_id;
            ds.texts[{e.class_id, e.instance_id}] = std::move(t);
        }
    }
    return ds;
}

Digest dataset_manifest_hash(const std::filesystem::path& dataset_dir) {
    return Sha256::of_file(dataset_dir / "manifest.json");
}

}  // namespace stylebank
