#pragma once

// Region covariance descriptor: per-pixel 9-d features, one-pass covariance,
// the 42-element region feature and the posterior -> decision map.

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace eadf {

/// Y, U, V planes stored row-major (index = x2 * width + x1).
struct ImageRegion {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> Y;
    std::vector<double> U;
    std::vector<double> V;
    std::pair<long, long> origin{0, 0};  // (x1, x2) offset inside the source frame

    ImageRegion() = default;
    /// Zero-filled planes. Throws ValidationError when smaller than 3x3.
    ImageRegion(std::size_t width, std::size_t height);

    double y_at(std::size_t x1, std::size_t x2) const { return Y[x2 * width + x1]; }
    /// Throws ValidationError on an undersized region or mismatched planes.
    void validate() const;
    /// Copies the window [x1, x1 + w) x [x2, x2 + h); origin is offset accordingly.
    ImageRegion crop(std::size_t x1, std::size_t x2, std::size_t w, std::size_t h) const;
};

/// [x1, x2, Y, U, V, |dY/dx1|, |dY/dx2|, |d2Y/dx1^2|, |d2Y/dx2^2|]
using PixelFeature = std::array<double, 9>;

enum class BorderPolicy { InteriorOnly, ReplicateEdge };

/// Features for every pixel, row-major. Interior derivatives use the filters
/// [-1 0 1] and [-1 2 -1] unnormalized; on the 1-pixel border the missing
/// neighbour is replaced by the edge pixel.
struct FeatureGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<PixelFeature> pixels;

    const PixelFeature& at(std::size_t x1, std::size_t x2) const { return pixels[x2 * width + x1]; }
    bool interior(std::size_t x1, std::size_t x2) const {
        return x1 > 0 && x2 > 0 && x1 + 1 < width && x2 + 1 < height;
    }
};

FeatureGrid pixel_features(const ImageRegion& region);

/// 9x9 covariance, row-major.
struct RegionCovariance {
    std::array<double, 81> C{};
    std::size_t n_px = 0;

    double operator()(std::size_t i, std::size_t j) const { return C[i * 9 + j]; }
    double& operator()(std::size_t i, std::size_t j) { return C[i * 9 + j]; }
};

/// C = (sum z z^T - (1/n) sum z sum z^T) / (n - 1) accumulated in one pass,
/// with z measured from the first contributing pixel.
/// Throws ValidationError when fewer than 2 pixels contribute.
RegionCovariance region_covariance(const FeatureGrid& features,
                                   BorderPolicy policy = BorderPolicy::InteriorOnly);

inline constexpr std::size_t kRegionFeatureSize = 42;
using RegionFeature = std::array<double, kRegionFeatureSize>;

/// Lower triangle of C, i outer and j <= i inner (1-based), skipping
/// c(1,1), c(2,1) and c(2,2).
RegionFeature region_feature(const RegionCovariance& c);

/// Convenience: pixel_features -> region_covariance -> region_feature.
RegionFeature describe_region(const ImageRegion& region, BorderPolicy policy = BorderPolicy::InteriorOnly);

/// 2p - 1. Throws DomainError outside [0, 1].
double decision_d5(double posterior);

enum class ImageFormat { PGM, PPM };

/// Binary P5 or P6 with maxval 255. PGM fills Y only; PPM converts with
/// Y = .299R + .587G + .114B, U = .492(B - Y), V = .877(R - Y).
/// Throws FormatError on unsupported magic, maxval or a truncated payload.
ImageRegion load_image(const std::filesystem::path& path);
ImageRegion load_image(const std::filesystem::path& path, ImageFormat expected);
ImageRegion parse_image(const std::string& bytes);

/// 8-bit grey image as binary P5.
void save_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
              const std::vector<unsigned char>& pixels);
/// Interleaved RGB as binary P6.
void save_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
              const std::vector<unsigned char>& rgb);

/// Raw 8-bit payload of a P5 file, for masks.
struct GreyImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> pixels;
};
GreyImage load_pgm(const std::filesystem::path& path);

}  // namespace eadf
