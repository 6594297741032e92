#include "eadf/covariance.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eadf/error.hpp"

namespace eadf {

ImageRegion::ImageRegion(std::size_t w, std::size_t h)
    : width(w), height(h), Y(w * h, 0.0), U(w * h, 0.0), V(w * h, 0.0) {
    validate();
}

void ImageRegion::validate() const {
    if (width < 3 || height < 3) {
        throw ValidationError("region must be at least 3x3, got " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
    const std::size_t n = width * height;
    if (Y.size() != n || U.size() != n || V.size() != n) {
        throw DimensionError("channel planes do not match region size");
    }
}

ImageRegion ImageRegion::crop(std::size_t x1, std::size_t x2, std::size_t w, std::size_t h) const {
    if (x1 + w > width || x2 + h > height) throw ValidationError("crop window exceeds the region");
    ImageRegion out(w, h);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t src = (x2 + r) * width + (x1 + c);
            const std::size_t dst = r * w + c;
            out.Y[dst] = Y[src];
            out.U[dst] = U[src];
            out.V[dst] = V[src];
        }
    }
    out.origin = {origin.first + static_cast<long>(x1), origin.second + static_cast<long>(x2)};
    return out;
}

FeatureGrid pixel_features(const ImageRegion& region) {
    region.validate();
    const std::size_t w = region.width;
    const std::size_t h = region.height;
    FeatureGrid grid{w, h, std::vector<PixelFeature>(w * h)};
    for (std::size_t x2 = 0; x2 < h; ++x2) {
        const std::size_t up = x2 == 0 ? 0 : x2 - 1;
        const std::size_t down = x2 + 1 == h ? x2 : x2 + 1;
        for (std::size_t x1 = 0; x1 < w; ++x1) {
            const std::size_t left = x1 == 0 ? 0 : x1 - 1;
            const std::size_t right = x1 + 1 == w ? x1 : x1 + 1;
            const double y = region.y_at(x1, x2);
            const double yl = region.y_at(left, x2);
            const double yr = region.y_at(right, x2);
            const double yu = region.y_at(x1, up);
            const double yd = region.y_at(x1, down);
            const std::size_t k = x2 * w + x1;
            grid.pixels[k] = {static_cast<double>(x1),
                              static_cast<double>(x2),
                              y,
                              region.U[k],
                              region.V[k],
                              std::abs(yr - yl),
                              std::abs(yd - yu),
                              std::abs(-yl + 2.0 * y - yr),
                              std::abs(-yu + 2.0 * y - yd)};
        }
    }
    return grid;
}

RegionCovariance region_covariance(const FeatureGrid& features, BorderPolicy policy) {
    std::array<double, 9> sum{};
    std::array<double, 81> cross{};
    // Sums are taken about the first contributing pixel (shifted data), which
    // keeps the single pass but avoids cancellation on large means; constant
    // features accumulate exact zeros.
    PixelFeature shift{};
    std::size_t n = 0;
    for (std::size_t x2 = 0; x2 < features.height; ++x2) {
        for (std::size_t x1 = 0; x1 < features.width; ++x1) {
            if (policy == BorderPolicy::InteriorOnly && !features.interior(x1, x2)) continue;
            const PixelFeature& raw = features.at(x1, x2);
            if (n == 0) shift = raw;
            PixelFeature z;
            for (std::size_t i = 0; i < 9; ++i) z[i] = raw[i] - shift[i];
            for (std::size_t i = 0; i < 9; ++i) {
                sum[i] += z[i];
                for (std::size_t j = 0; j <= i; ++j) cross[i * 9 + j] += z[i] * z[j];
            }
            ++n;
        }
    }
    if (n < 2) throw ValidationError("covariance needs at least 2 pixels, got " + std::to_string(n));

    RegionCovariance out;
    out.n_px = n;
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < 9; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double c = (cross[i * 9 + j] - sum[i] * sum[j] / nn) / (nn - 1.0);
            out(i, j) = c;
            out(j, i) = c;
        }
    }
    return out;
}

RegionFeature region_feature(const RegionCovariance& c) {
    RegionFeature f{};
    std::size_t k = 0;
    for (std::size_t i = 0; i < 9; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            if (i < 2 && j < 2) continue;  // coordinate block, identical for same-shaped regions
            f[k++] = c(i, j);
        }
    }
    return f;
}

RegionFeature describe_region(const ImageRegion& region, BorderPolicy policy) {
    return region_feature(region_covariance(pixel_features(region), policy));
}

double decision_d5(double posterior) {
    if (!(posterior >= 0.0 && posterior <= 1.0)) {
        throw DomainError("posterior must lie in [0, 1]");
    }
    return 2.0 * posterior - 1.0;
}

// ---------------------------------------------------------------- netpbm

namespace {

struct Header {
    std::string magic;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t payload_offset = 0;
};

// Reads magic, width, height and maxval, skipping whitespace and '#' comments.
Header read_header(const std::string& bytes) {
    std::size_t pos = 0;
    auto skip = [&] {
        while (pos < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&](const char* what) {
        skip();
        const std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw FormatError(std::string("missing ") + what + " in image header");
        return static_cast<std::size_t>(std::stoull(bytes.substr(start, pos - start)));
    };

    Header h;
    if (bytes.size() < 2) throw FormatError("image file is empty");
    h.magic = bytes.substr(0, 2);
    if (h.magic != "P5" && h.magic != "P6") {
        throw FormatError("unsupported image format '" + h.magic + "' (need binary P5 or P6)");
    }
    pos = 2;
    h.width = number("width");
    h.height = number("height");
    const std::size_t maxval = number("maxval");
    if (maxval != 255) throw FormatError("unsupported maxval " + std::to_string(maxval) + " (need 255)");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw FormatError("truncated image header");
    }
    h.payload_offset = pos + 1;
    if (h.width == 0 || h.height == 0) throw FormatError("image has zero size");
    const std::size_t channels = h.magic == "P6" ? 3 : 1;
    if (bytes.size() - h.payload_offset < h.width * h.height * channels) {
        throw FormatError("truncated image payload");
    }
    return h;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t width, std::size_t height,
                  const std::vector<unsigned char>& payload, std::size_t channels) {
    if (payload.size() != width * height * channels) throw DimensionError("pixel buffer does not match image size");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << magic << '\n' << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

}  // namespace

ImageRegion parse_image(const std::string& bytes) {
    const Header h = read_header(bytes);
    ImageRegion img;
    img.width = h.width;
    img.height = h.height;
    const std::size_t n = h.width * h.height;
    img.Y.assign(n, 0.0);
    img.U.assign(n, 0.0);
    img.V.assign(n, 0.0);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
    if (h.magic == "P5") {
        for (std::size_t k = 0; k < n; ++k) img.Y[k] = p[k];
    } else {
        for (std::size_t k = 0; k < n; ++k) {
            const double r = p[3 * k];
            const double g = p[3 * k + 1];
            const double b = p[3 * k + 2];
            const double y = 0.299 * r + 0.587 * g + 0.114 * b;
            img.Y[k] = y;
            img.U[k] = 0.492 * (b - y);
            img.V[k] = 0.877 * (r - y);
        }
    }
    img.validate();
    return img;
}

ImageRegion load_image(const std::filesystem::path& path) { return parse_image(read_file(path)); }

ImageRegion load_image(const std::filesystem::path& path, ImageFormat expected) {
    const std::string bytes = read_file(path);
    const char* want = expected == ImageFormat::PGM ? "P5" : "P6";
    if (bytes.compare(0, 2, want) != 0) {
        throw FormatError("expected " + std::string(want) + " image in '" + path.string() + "'");
    }
    return parse_image(bytes);
}

GreyImage load_pgm(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const Header h = read_header(bytes);
    if (h.magic != "P5") throw FormatError("mask must be a binary P5 image");
    GreyImage g{h.width, h.height, {}};
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
    g.pixels.assign(p, p + h.width * h.height);
    return g;
}

void save_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
              const std::vector<unsigned char>& pixels) {
    write_netpbm(path, "P5", width, height, pixels, 1);
}

void save_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
              const std::vector<unsigned char>& rgb) {
    write_netpbm(path, "P6", width, height, rgb, 3);
}

}  // namespace eadf
