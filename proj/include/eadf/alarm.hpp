#pragma once

// Per-pixel fused decisions -> region alarms.

#include <cstddef>
#include <filesystem>
#include <vector>

#include "json.hpp"

namespace eadf {

/// Binary mask, row-major; true where the fused decision is >= 0.
struct DecisionMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<bool> mask;

    DecisionMap() = default;
    DecisionMap(std::size_t w, std::size_t h) : width(w), height(h), mask(w * h, false) {}

    bool at(std::size_t x, std::size_t y) const { return mask[y * width + x]; }
    void set(std::size_t x, std::size_t y, bool v = true) { mask[y * width + x] = v; }
    std::size_t count() const;

    /// Thresholds fused values (row-major) at 0.
    static DecisionMap from_decisions(std::size_t width, std::size_t height, const std::vector<double>& fused);

    bool operator==(const DecisionMap&) const = default;
};

struct BoundingBox {
    std::size_t x_min = 0;
    std::size_t y_min = 0;
    std::size_t x_max = 0;
    std::size_t y_max = 0;
    bool operator==(const BoundingBox&) const = default;
};

struct AlarmRegion {
    std::size_t component_id = 0;
    std::size_t pixel_count = 0;
    BoundingBox bbox;
    std::vector<std::size_t> pixels;  // row-major indices of member pixels
};

inline constexpr std::size_t kDefaultMinPixels = 16;

/// Erosion then dilation with a (2r+1)-square element; pixels outside the
/// map count as background. r = 0 returns the mask unchanged.
DecisionMap morph_open(const DecisionMap& mask, int kernel_radius = 1);

/// 8-connected components with more than min_pixels pixels, sorted by
/// descending size (ties by first pixel in scan order). Component ids are
/// 1-based positions in the returned list. Throws ValidationError when
/// min_pixels < 1.
std::vector<AlarmRegion> extract_alarms(const DecisionMap& mask, std::size_t min_pixels = kDefaultMinPixels);

/// Mask files are P5 with 0 for background and 255 for foreground; any
/// non-zero byte reads as foreground.
DecisionMap load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const DecisionMap& mask);

/// [{component_id, pixel_count, bbox: [x_min, y_min, x_max, y_max]}, ...]
nlohmann::json alarms_to_json(const std::vector<AlarmRegion>& alarms);

}  // namespace eadf
