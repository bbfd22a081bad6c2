#include "oclb/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "oclb/errors.hpp"

namespace oclb {

namespace {

constexpr std::size_t kBlurKernel = 11;

float luminance(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) {
        return 0;
    }
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    while (i < 0 || i > last) {
        if (i < 0) i = -i;
        if (i > last) i = 2 * last - i;
    }
    return static_cast<std::size_t>(i);
}

float bilinear(const Image& img, double x, double y, std::size_t c) {
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const double ax = x - fx0;
    const double ay = y - fy0;
    const auto x0 = static_cast<std::ptrdiff_t>(fx0);
    const auto y0 = static_cast<std::ptrdiff_t>(fy0);
    const auto w = static_cast<std::ptrdiff_t>(img.width());
    const auto h = static_cast<std::ptrdiff_t>(img.height());
    auto px = [&](std::ptrdiff_t xx, std::ptrdiff_t yy) -> double {
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) return 0.0;
        return img.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c);
    };
    double v = 0.0;
    if ((1.0 - ax) * (1.0 - ay) != 0.0) v += (1.0 - ax) * (1.0 - ay) * px(x0, y0);
    if (ax * (1.0 - ay) != 0.0) v += ax * (1.0 - ay) * px(x0 + 1, y0);
    if ((1.0 - ax) * ay != 0.0) v += (1.0 - ax) * ay * px(x0, y0 + 1);
    if (ax * ay != 0.0) v += ax * ay * px(x0 + 1, y0 + 1);
    return static_cast<float>(v);
}

/// Homography h (h[8] == 1) mapping each src[i] to dst[i]; solved by Gaussian elimination.
std::array<double, 9> homography(const std::array<std::array<double, 2>, 4>& src,
                                 const std::array<std::array<double, 2>, 4>& dst) {
    double a[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        const double x = src[i][0], y = src[i][1], u = dst[i][0], v = dst[i][1];
        double r0[9] = {x, y, 1, 0, 0, 0, -u * x, -u * y, u};
        double r1[9] = {0, 0, 0, x, y, 1, -v * x, -v * y, v};
        std::copy(r0, r0 + 9, a[2 * i]);
        std::copy(r1, r1 + 9, a[2 * i + 1]);
    }
    for (int col = 0; col < 8; ++col) {
        int piv = col;
        for (int r = col + 1; r < 8; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        if (std::abs(a[piv][col]) < 1e-12) {
            throw NumericError("homography: degenerate corners", static_cast<std::size_t>(col));
        }
        std::swap(a[col], a[piv]);
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int k = col; k < 9; ++k) a[r][k] -= f * a[col][k];
        }
    }
    std::array<double, 9> h{};
    for (int i = 0; i < 8; ++i) h[i] = a[i][8] / a[i][i];
    h[8] = 1.0;
    return h;
}

}  // namespace

Image::Image(std::size_t h, std::size_t w, float fill) : h_(h), w_(w), data_(h * w * 3, fill) {}

void Image::clamp() {
    for (auto& v : data_) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
}

FeatureMap Image::to_feature_map() const {
    return FeatureMap(h_, w_, 3, data_);
}

Image Image::from_feature_map(const FeatureMap& g) {
    if (g.channels() != 3) {
        throw ContractError("Image::from_feature_map: expected 3 channels");
    }
    Image img(g.height(), g.width());
    std::copy(g.data().begin(), g.data().end(), img.data_.begin());
    img.clamp();
    return img;
}

std::string_view to_string(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::clean: return "clean";
        case AugmentKind::illum: return "illum";
        case AugmentKind::noise: return "noise";
        case AugmentKind::geom: return "geom";
        case AugmentKind::all: return "all";
    }
    return "?";
}

std::optional<AugmentKind> parse_augment_kind(std::string_view name) {
    for (auto k : {AugmentKind::clean, AugmentKind::illum, AugmentKind::noise, AugmentKind::geom, AugmentKind::all}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float delta = mx - mn;
    v = mx;
    s = mx > 0.0f ? delta / mx : 0.0f;
    if (delta <= 0.0f) {
        h = 0.0f;
        return;
    }
    float hh;
    if (mx == r) {
        hh = (g - b) / delta;
    } else if (mx == g) {
        hh = 2.0f + (b - r) / delta;
    } else {
        hh = 4.0f + (r - g) / delta;
    }
    hh /= 6.0f;
    h = hh - std::floor(hh);
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    const float hh = (h - std::floor(h)) * 6.0f;
    const int sector = std::min(static_cast<int>(hh), 5);
    const float f = hh - static_cast<float>(sector);
    const float p = v * (1.0f - s);
    const float q = v * (1.0f - s * f);
    const float t = v * (1.0f - s * (1.0f - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

IllumParams draw_illum(RngStream& rng) {
    IllumParams p;
    p.brightness = rng.uniform(0.5, 1.5);
    p.contrast = rng.uniform(0.5, 1.0);
    p.saturation = rng.uniform(0.5, 1.5);
    p.hue = rng.uniform(-0.1, 0.1);
    return p;
}

double draw_blur_sigma(RngStream& rng) {
    return rng.uniform(0.1, 0.5);
}

GeomParams draw_geom(RngStream& rng) {
    GeomParams p;
    p.angle_deg = rng.uniform(-30.0, 30.0);
    p.translate_x = rng.uniform(-0.2, 0.2);
    p.translate_y = rng.uniform(-0.2, 0.2);
    p.scale = rng.uniform(0.8, 1.2);
    p.shear = rng.uniform(-0.1, 0.1);
    if (rng.chance(0.2)) {
        std::array<std::array<double, 2>, 4> corners{};
        for (auto& c : corners) {
            c[0] = rng.uniform(0.0, 0.2);
            c[1] = rng.uniform(0.0, 0.2);
        }
        p.perspective = corners;
    }
    p.hflip = rng.chance(0.5);
    p.vflip = rng.chance(0.3);
    return p;
}

Image apply_illum(const Image& img, const IllumParams& p) {
    Image out = img;
    auto data = out.data();
    const std::size_t n = img.height() * img.width();

    for (auto& v : data) {
        v = std::clamp(static_cast<float>(v * p.brightness), 0.0f, 1.0f);
    }

    double gray_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        gray_sum += luminance(data[3 * i], data[3 * i + 1], data[3 * i + 2]);
    }
    const double gray_mean = gray_sum / static_cast<double>(n);
    for (auto& v : data) {
        v = std::clamp(static_cast<float>(p.contrast * v + (1.0 - p.contrast) * gray_mean), 0.0f, 1.0f);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const float l = luminance(data[3 * i], data[3 * i + 1], data[3 * i + 2]);
        for (std::size_t c = 0; c < 3; ++c) {
            auto& v = data[3 * i + c];
            v = std::clamp(static_cast<float>(p.saturation * v + (1.0 - p.saturation) * l), 0.0f, 1.0f);
        }
    }

    if (p.hue != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            float h, s, v;
            rgb_to_hsv(data[3 * i], data[3 * i + 1], data[3 * i + 2], h, s, v);
            hsv_to_rgb(h + static_cast<float>(p.hue), s, v, data[3 * i], data[3 * i + 1], data[3 * i + 2]);
        }
    }
    out.clamp();
    return out;
}

Image apply_blur(const Image& img, double sigma) {
    if (!(sigma > 0.0)) {
        throw ContractError("apply_blur: sigma must be positive");
    }
    constexpr auto radius = static_cast<std::ptrdiff_t>(kBlurKernel / 2);
    std::array<double, kBlurKernel> k{};
    double total = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        total += v;
    }
    for (auto& v : k) v /= total;

    const std::size_t h = img.height();
    const std::size_t w = img.width();
    Image tmp(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                double s = 0.0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                    s += k[static_cast<std::size_t>(i + radius)] *
                         img.at(y, reflect(static_cast<std::ptrdiff_t>(x) + i, w), c);
                }
                tmp.at(y, x, c) = static_cast<float>(s);
            }
        }
    }
    Image out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                double s = 0.0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
                    s += k[static_cast<std::size_t>(i + radius)] *
                         tmp.at(reflect(static_cast<std::ptrdiff_t>(y) + i, h), x, c);
                }
                out.at(y, x, c) = static_cast<float>(s);
            }
        }
    }
    out.clamp();
    return out;
}

Image apply_geom(const Image& img, const GeomParams& p) {
    const std::size_t h = img.height();
    const std::size_t w = img.width();
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double tx = p.translate_x * static_cast<double>(w);
    const double ty = p.translate_y * static_cast<double>(h);

    // Forward affine A = R * Shear * Scale about the center; we need its inverse.
    const double th = p.angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(th);
    const double s = std::sin(th);
    const double a00 = p.scale * c;
    const double a01 = p.scale * (c * p.shear - s);
    const double a10 = p.scale * s;
    const double a11 = p.scale * (s * p.shear + c);
    const double det = a00 * a11 - a01 * a10;
    const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;

    std::optional<std::array<double, 9>> hom;
    if (p.perspective) {
        const double wl = static_cast<double>(w) - 1.0;
        const double hl = static_cast<double>(h) - 1.0;
        const double hw = static_cast<double>(w / 2);
        const double hh = static_cast<double>(h / 2);
        const auto& d = *p.perspective;
        const std::array<std::array<double, 2>, 4> start{{{0, 0}, {wl, 0}, {wl, hl}, {0, hl}}};
        const std::array<std::array<double, 2>, 4> end{{{d[0][0] * hw, d[0][1] * hh},
                                                        {wl - d[1][0] * hw, d[1][1] * hh},
                                                        {wl - d[2][0] * hw, hl - d[2][1] * hh},
                                                        {d[3][0] * hw, hl - d[3][1] * hh}}};
        // Content at start[i] moves to end[i]; sampling needs the end -> start map.
        hom = homography(end, start);
    }

    Image out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double qx = p.hflip ? static_cast<double>(w - 1 - x) : static_cast<double>(x);
            double qy = p.vflip ? static_cast<double>(h - 1 - y) : static_cast<double>(y);
            if (hom) {
                const auto& m = *hom;
                const double den = m[6] * qx + m[7] * qy + m[8];
                const double nx = (m[0] * qx + m[1] * qy + m[2]) / den;
                const double ny = (m[3] * qx + m[4] * qy + m[5]) / den;
                qx = nx;
                qy = ny;
            }
            const double dx = qx - cx - tx;
            const double dy = qy - cy - ty;
            const double sx = i00 * dx + i01 * dy + cx;
            const double sy = i10 * dx + i11 * dy + cy;
            for (std::size_t ch = 0; ch < 3; ++ch) {
                out.at(y, x, ch) = bilinear(img, sx, sy, ch);
            }
        }
    }
    out.clamp();
    return out;
}

Image augment(const Image& img, AugmentKind kind, RngStream& rng) {
    switch (kind) {
        case AugmentKind::clean: return img;
        case AugmentKind::illum: return apply_illum(img, draw_illum(rng));
        case AugmentKind::noise: return apply_blur(img, draw_blur_sigma(rng));
        case AugmentKind::geom: return apply_geom(img, draw_geom(rng));
        case AugmentKind::all: {
            const GeomParams g = draw_geom(rng);
            const double sigma = draw_blur_sigma(rng);
            const IllumParams il = draw_illum(rng);
            return apply_illum(apply_blur(apply_geom(img, g), sigma), il);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------

namespace {

/// Zero-mean filters respond to contrast, so no channel stays silent across a whole image.
void center_filters(std::vector<float>& w, std::size_t fan_in) {
    for (std::size_t o = 0; o < w.size(); o += fan_in) {
        double mean = 0.0;
        for (std::size_t i = 0; i < fan_in; ++i) mean += w[o + i];
        mean /= static_cast<double>(fan_in);
        for (std::size_t i = 0; i < fan_in; ++i) w[o + i] = static_cast<float>(w[o + i] - mean);
    }
}

}  // namespace

ToyBackbone::ToyBackbone(std::uint64_t seed, std::size_t channels, std::size_t hidden)
    : channels_(channels), hidden_(hidden), w1_(hidden * 27), w2_(channels * hidden * 9) {
    if (channels == 0 || hidden == 0) {
        throw ContractError("ToyBackbone: channel counts must be >= 1");
    }
    RngStream r1(seed, "backbone/conv1");
    const double s1 = std::sqrt(2.0 / 27.0);
    for (auto& v : w1_) v = static_cast<float>(s1 * r1.normal());
    RngStream r2(seed, "backbone/conv2");
    const double s2 = std::sqrt(2.0 / static_cast<double>(hidden * 9));
    for (auto& v : w2_) v = static_cast<float>(s2 * r2.normal());
    center_filters(w1_, 27);
    center_filters(w2_, hidden * 9);
}

namespace {

/// 3x3, stride 2, zero padding 1, bias-free, followed by ReLU. `in` is h x w x cin.
std::vector<float> conv_relu(std::span<const float> in, std::size_t h, std::size_t w, std::size_t cin,
                             std::span<const float> weights, std::size_t cout, std::size_t& oh, std::size_t& ow) {
    oh = (h + 1) / 2;
    ow = (w + 1) / 2;
    std::vector<float> out(oh * ow * cout, 0.0f);
    std::vector<double> acc(cout);
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(2 * oy + ky) - 1;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const auto ix = static_cast<std::ptrdiff_t>(2 * ox + kx) - 1;
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                    const float* px = &in[(static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin];
                    for (std::size_t o = 0; o < cout; ++o) {
                        const float* wk = &weights[((o * cin) * 3 + ky) * 3 + kx];
                        double s = 0.0;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            s += static_cast<double>(wk[ci * 9]) * px[ci];
                        }
                        acc[o] += s;
                    }
                }
            }
            for (std::size_t o = 0; o < cout; ++o) {
                out[(oy * ow + ox) * cout + o] = static_cast<float>(std::max(0.0, acc[o]));
            }
        }
    }
    return out;
}

}  // namespace

FeatureMap ToyBackbone::forward(const Image& img) const {
    if (img.height() < kMinSize || img.width() < kMinSize) {
        throw ContractError("ToyBackbone: image smaller than " + std::to_string(kMinSize) + "x" +
                            std::to_string(kMinSize));
    }
    std::size_t h1, w1, h2, w2;
    const auto a1 = conv_relu(img.data(), img.height(), img.width(), 3, w1_, hidden_, h1, w1);
    auto a2 = conv_relu(a1, h1, w1, hidden_, w2_, channels_, h2, w2);
    return FeatureMap(h2, w2, channels_, std::move(a2));
}

// ---------------------------------------------------------------------------

std::vector<SyntheticClassSpec> default_class_specs(std::size_t n_classes) {
    const Shape shapes[] = {Shape::disk, Shape::bar, Shape::cross, Shape::ring, Shape::checker};
    std::vector<SyntheticClassSpec> out;
    for (std::size_t i = 0; i < n_classes; ++i) {
        SyntheticClassSpec s;
        s.id = static_cast<ClassId>(i);
        s.shape = shapes[i % 5];
        s.hue = std::fmod(static_cast<double>(i) / static_cast<double>(std::min<std::size_t>(n_classes, 5)) +
                              0.1 * static_cast<double>(i / 5),
                          1.0);
        s.texture_freq = 2.0 + static_cast<double>(i % 5) + 0.5 * static_cast<double>(i / 5);
        s.size_fraction = 0.6 - 0.1 * static_cast<double>((i / 5) % 3);
        out.push_back(s);
    }
    return out;
}

Image render_class_sample(const SyntheticClassSpec& spec, std::size_t size, RngStream& rng) {
    const double sz = static_cast<double>(size);
    const double dx = rng.uniform(-0.08, 0.08) * sz;
    const double dy = rng.uniform(-0.08, 0.08) * sz;
    const double rot = rng.uniform(-0.4, 0.4);
    const double scale = rng.uniform(0.85, 1.15);
    const double hue = spec.hue + rng.uniform(-0.03, 0.03);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double radius = spec.size_fraction * sz / 2.0 * scale;
    const double c = (sz - 1.0) / 2.0;
    const double cr = std::cos(-rot);
    const double sr = std::sin(-rot);

    Image img(size, size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double px = static_cast<double>(x) - c - dx;
            const double py = static_cast<double>(y) - c - dy;
            const double u = (cr * px - sr * py) / radius;
            const double v = (sr * px + cr * py) / radius;
            const double rho = std::hypot(u, v);
            bool inside = false;
            switch (spec.shape) {
                case Shape::disk: inside = rho <= 1.0; break;
                case Shape::bar: inside = std::abs(u) <= 1.0 && std::abs(v) <= 0.3; break;
                case Shape::cross:
                    inside = (std::abs(u) <= 1.0 && std::abs(v) <= 0.25) || (std::abs(v) <= 1.0 && std::abs(u) <= 0.25);
                    break;
                case Shape::ring: inside = rho >= 0.6 && rho <= 1.0; break;
                case Shape::checker:
                    inside = std::abs(u) <= 1.0 && std::abs(v) <= 1.0 &&
                             (static_cast<int>(std::floor((u + 1.0) * 2.0)) +
                              static_cast<int>(std::floor((v + 1.0) * 2.0))) % 2 == 0;
                    break;
            }
            float r, g, b;
            if (inside) {
                const double val = 0.6 + 0.35 * std::sin(std::numbers::pi * spec.texture_freq * u + phase);
                hsv_to_rgb(static_cast<float>(hue), 0.75f, static_cast<float>(val), r, g, b);
            } else {
                const float bg = static_cast<float>(0.1 + rng.uniform(-0.03, 0.03));
                r = g = b = bg;
            }
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    }
    img.clamp();
    return img;
}

ImageDataset gen_image_dataset(std::span<const SyntheticClassSpec> specs, std::size_t train_per_class,
                               std::size_t test_per_class, std::size_t image_size, std::uint64_t seed) {
    if (specs.size() < 2) {
        throw ContractError("gen_image_dataset: need at least 2 classes");
    }
    std::set<ClassId> ids;
    for (const auto& s : specs) {
        if (!ids.insert(s.id).second) {
            throw DataError("gen_image_dataset: duplicate class id " + std::to_string(s.id));
        }
    }
    ImageDataset ds;
    for (const auto& s : specs) {
        for (std::size_t i = 0; i < train_per_class; ++i) {
            RngStream rng(seed, "img/train/" + std::to_string(s.id) + "/" + std::to_string(i));
            ds.train.push_back({render_class_sample(s, image_size, rng), s.id});
        }
        for (std::size_t i = 0; i < test_per_class; ++i) {
            RngStream rng(seed, "img/test/" + std::to_string(s.id) + "/" + std::to_string(i));
            ds.test.push_back({render_class_sample(s, image_size, rng), s.id});
        }
    }
    return ds;
}

FeatureDataset gen_feature_dataset(const FeatureDatasetSpec& spec) {
    if (spec.dim == 0) {
        throw ContractError("gen_feature_dataset: dim must be >= 1");
    }
    if (!(spec.anisotropy >= 1.0)) {
        throw ContractError("gen_feature_dataset: anisotropy must be >= 1");
    }
    const std::size_t d = spec.dim;
    RngStream base(spec.seed, "features");

    // Random orthonormal basis via Gram-Schmidt.
    RngStream rot = base.substream("rotation");
    std::vector<std::vector<double>> q(d, std::vector<double>(d));
    for (std::size_t i = 0; i < d; ++i) {
        for (;;) {
            for (auto& v : q[i]) v = rot.normal();
            for (std::size_t j = 0; j < i; ++j) {
                const double p = dot(q[i], q[j]);
                for (std::size_t k = 0; k < d; ++k) q[i][k] -= p * q[j][k];
            }
            const double nrm = std::sqrt(dot(q[i], q[i]));
            if (nrm > 1e-8) {
                for (auto& v : q[i]) v /= nrm;
                break;
            }
        }
    }
    std::vector<double> scale(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double t = d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
        scale[i] = std::sqrt(std::pow(spec.anisotropy, 1.0 - t));  // variances from anisotropy down to 1
    }

    RngStream mean_rng = base.substream("means");
    RngStream skew_rng = base.substream("skew");
    std::vector<std::vector<double>> means(spec.n_classes, std::vector<double>(d));
    std::vector<std::vector<double>> skew_dir(spec.n_classes, std::vector<double>(d));
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        for (auto& v : means[c]) v = mean_rng.normal();
        const double nrm = std::sqrt(dot(means[c], means[c]));
        for (auto& v : means[c]) v *= spec.separation / nrm;
        for (auto& v : skew_dir[c]) v = skew_rng.normal();
        const double sn = std::sqrt(dot(skew_dir[c], skew_dir[c]));
        for (auto& v : skew_dir[c]) v /= sn;
    }

    auto sample = [&](std::size_t c, RngStream& rng) {
        std::vector<double> z = means[c];
        for (std::size_t i = 0; i < d; ++i) {
            const double n = rng.normal() * scale[i];
            for (std::size_t k = 0; k < d; ++k) z[k] += n * q[i][k];
        }
        if (spec.skew != 0.0) {
            const double e = -std::log(1.0 - rng.uniform01()) - 1.0;
            for (std::size_t k = 0; k < d; ++k) z[k] += spec.skew * e * skew_dir[c][k];
        }
        return z;
    };

    FeatureDataset ds;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        const auto label = static_cast<ClassId>(c);
        RngStream tr = base.substream("train/" + std::to_string(c));
        for (std::size_t i = 0; i < spec.train_per_class; ++i) ds.train.push_back({sample(c, tr), label});
        RngStream te = base.substream("test/" + std::to_string(c));
        for (std::size_t i = 0; i < spec.test_per_class; ++i) ds.test.push_back({sample(c, te), label});
    }
    return ds;
}

}  // namespace oclb
