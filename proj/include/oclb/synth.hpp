#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oclb/learners.hpp"
#include "oclb/rng.hpp"
#include "oclb/tensor.hpp"

namespace oclb {

/// RGB image with values in [0, 1], row-major, channel innermost.
class Image {
public:
    Image() = default;
    Image(std::size_t h, std::size_t w, float fill = 0.0f);

    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    float& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * w_ + x) * 3 + c]; }
    float at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * w_ + x) * 3 + c]; }
    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    void clamp();
    /// Image as an h x w x 3 FeatureMap.
    FeatureMap to_feature_map() const;
    static Image from_feature_map(const FeatureMap& g);

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t h_ = 0;
    std::size_t w_ = 0;
    std::vector<float> data_;
};

// ---------------------------------------------------------------------------
// Augmentations

enum class AugmentKind { clean, illum, noise, geom, all };

std::string_view to_string(AugmentKind kind);
std::optional<AugmentKind> parse_augment_kind(std::string_view name);

/// Color jitter factors. Ranges: brightness [0.5,1.5], contrast [0.5,1], saturation [0.5,1.5], hue [-0.1,0.1].
struct IllumParams {
    double brightness = 1.0;
    double contrast = 1.0;
    double saturation = 1.0;
    double hue = 0.0;  // fraction of the hue circle
};

/// Affine about the image center, then optional perspective, then flips.
struct GeomParams {
    double angle_deg = 0.0;  // [-30, 30]
    double translate_x = 0.0;  // fraction of width, [-0.2, 0.2]
    double translate_y = 0.0;  // fraction of height, [-0.2, 0.2]
    double scale = 1.0;        // [0.8, 1.2]
    double shear = 0.0;        // x-shear coefficient, [-0.1, 0.1]
    /// Inward corner displacements (tl, tr, br, bl) as fractions of the half extents, each in [0, 0.2].
    std::optional<std::array<std::array<double, 2>, 4>> perspective;
    bool hflip = false;
    bool vflip = false;
};

IllumParams draw_illum(RngStream& rng);
/// Gaussian blur sigma in [0.1, 0.5].
double draw_blur_sigma(RngStream& rng);
GeomParams draw_geom(RngStream& rng);

Image apply_illum(const Image& img, const IllumParams& p);
/// 11 x 11 Gaussian blur with reflect padding.
Image apply_blur(const Image& img, double sigma);
/// Bilinear resampling with zero fill outside the source.
Image apply_geom(const Image& img, const GeomParams& p);

/// Draws parameters from `rng` and applies the augmentation; `all` is illum(noise(geom(img))).
Image augment(const Image& img, AugmentKind kind, RngStream& rng);

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v);
void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

// ---------------------------------------------------------------------------
// Toy backbone

/// Two bias-free 3x3 stride-2 convolutions with ReLU. Weights are drawn once from
/// seeded Gaussians, so the network is deterministic and positively homogeneous.
class ToyBackbone {
public:
    explicit ToyBackbone(std::uint64_t seed, std::size_t channels = 64, std::size_t hidden = 16);

    /// Output is ceil(H/4) x ceil(W/4) x channels. Throws ContractError for images under 8x8.
    FeatureMap forward(const Image& img) const;

    std::size_t channels() const noexcept { return channels_; }
    static constexpr std::size_t kMinSize = 8;
    static std::size_t output_extent(std::size_t in) { return (in + 3) / 4; }

private:
    std::size_t channels_;
    std::size_t hidden_;
    std::vector<float> w1_;  // [hidden][3][3][3]
    std::vector<float> w2_;  // [channels][hidden][3][3]
};

// ---------------------------------------------------------------------------
// Synthetic datasets

enum class Shape { disk, bar, cross, ring, checker };

struct SyntheticClassSpec {
    ClassId id = 0;
    Shape shape = Shape::disk;
    double hue = 0.0;
    double texture_freq = 2.0;
    double size_fraction = 0.6;
};

/// Five classes, one per shape, spread over the hue circle.
std::vector<SyntheticClassSpec> default_class_specs(std::size_t n_classes = 5);

struct LabeledImage {
    Image image;
    ClassId label = 0;
};

struct ImageDataset {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> test;
};

/// Renders one sample of `spec` with per-sample pose, scale and hue jitter drawn from `rng`.
Image render_class_sample(const SyntheticClassSpec& spec, std::size_t size, RngStream& rng);

/// Deterministic per seed. Throws DataError on duplicate class ids, ContractError for < 2 classes.
ImageDataset gen_image_dataset(std::span<const SyntheticClassSpec> specs, std::size_t train_per_class,
                               std::size_t test_per_class, std::size_t image_size, std::uint64_t seed);

struct FeatureDatasetSpec {
    std::size_t n_classes = 10;
    std::size_t dim = 16;
    std::size_t train_per_class = 50;
    std::size_t test_per_class = 50;
    double anisotropy = 1.0;  // condition number; covariance eigenvalues span [1, anisotropy]
    double skew = 0.0;        // scale of a per-class exponential component
    double separation = 6.0;  // norm of class means
    std::uint64_t seed = 0;
};

struct FeatureDataset {
    std::vector<LabeledEmbedding> train;
    std::vector<LabeledEmbedding> test;
};

/// Gaussian classes with means on a sphere and a shared randomly rotated covariance whose
/// eigenvalues are log-spaced from anisotropy down to 1.
FeatureDataset gen_feature_dataset(const FeatureDatasetSpec& spec);

}  // namespace oclb
