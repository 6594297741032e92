#include "eadf/alarm.hpp"

#include <algorithm>

#include "eadf/covariance.hpp"
#include "eadf/error.hpp"

namespace eadf {

std::size_t DecisionMap::count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

DecisionMap DecisionMap::from_decisions(std::size_t width, std::size_t height, const std::vector<double>& fused) {
    if (fused.size() != width * height) throw DimensionError("fused values do not match map size");
    DecisionMap m(width, height);
    for (std::size_t k = 0; k < fused.size(); ++k) m.mask[k] = fused[k] >= 0.0;
    return m;
}

namespace {

// Separable min/max filter: a square window is a row window followed by a
// column window.
DecisionMap window_filter(const DecisionMap& in, int r, bool erode) {
    const auto w = static_cast<long>(in.width);
    const auto h = static_cast<long>(in.height);
    auto sample = [&](const DecisionMap& m, long x, long y) {
        if (x < 0 || y < 0 || x >= w || y >= h) return false;
        return m.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    };
    auto pass = [&](const DecisionMap& src, bool horizontal) {
        DecisionMap out(in.width, in.height);
        for (long y = 0; y < h; ++y) {
            for (long x = 0; x < w; ++x) {
                bool v = erode;
                for (long k = -r; k <= r; ++k) {
                    const bool s = horizontal ? sample(src, x + k, y) : sample(src, x, y + k);
                    if (erode && !s) {
                        v = false;
                        break;
                    }
                    if (!erode && s) {
                        v = true;
                        break;
                    }
                }
                out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), v);
            }
        }
        return out;
    };
    return pass(pass(in, true), false);
}

}  // namespace

DecisionMap morph_open(const DecisionMap& mask, int kernel_radius) {
    if (kernel_radius < 0) throw ValidationError("kernel radius must be >= 0");
    if (mask.mask.size() != mask.width * mask.height) throw DimensionError("mask size mismatch");
    if (kernel_radius == 0) return mask;
    return window_filter(window_filter(mask, kernel_radius, true), kernel_radius, false);
}

std::vector<AlarmRegion> extract_alarms(const DecisionMap& mask, std::size_t min_pixels) {
    if (min_pixels < 1) throw ValidationError("min_pixels must be >= 1");
    if (mask.mask.size() != mask.width * mask.height) throw DimensionError("mask size mismatch");
    const std::size_t w = mask.width;
    const std::size_t h = mask.height;
    std::vector<bool> seen(w * h, false);
    std::vector<AlarmRegion> out;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < w * h; ++start) {
        if (!mask.mask[start] || seen[start]) continue;
        AlarmRegion region;
        region.bbox = {start % w, start / w, start % w, start / w};
        seen[start] = true;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t k = stack.back();
            stack.pop_back();
            region.pixels.push_back(k);
            const std::size_t x = k % w;
            const std::size_t y = k / w;
            region.bbox.x_min = std::min(region.bbox.x_min, x);
            region.bbox.x_max = std::max(region.bbox.x_max, x);
            region.bbox.y_min = std::min(region.bbox.y_min, y);
            region.bbox.y_max = std::max(region.bbox.y_max, y);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const long nx = static_cast<long>(x) + dx;
                    const long ny = static_cast<long>(y) + dy;
                    if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
                    const std::size_t nk = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                    if (mask.mask[nk] && !seen[nk]) {
                        seen[nk] = true;
                        stack.push_back(nk);
                    }
                }
            }
        }
        region.pixel_count = region.pixels.size();
        std::sort(region.pixels.begin(), region.pixels.end());
        if (region.pixel_count > min_pixels) out.push_back(std::move(region));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const AlarmRegion& a, const AlarmRegion& b) { return a.pixel_count > b.pixel_count; });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].component_id = i + 1;
    return out;
}

DecisionMap load_mask(const std::filesystem::path& path) {
    const GreyImage g = load_pgm(path);
    DecisionMap m(g.width, g.height);
    for (std::size_t k = 0; k < g.pixels.size(); ++k) m.mask[k] = g.pixels[k] != 0;
    return m;
}

void save_mask(const std::filesystem::path& path, const DecisionMap& mask) {
    std::vector<unsigned char> bytes(mask.mask.size());
    for (std::size_t k = 0; k < bytes.size(); ++k) bytes[k] = mask.mask[k] ? 255 : 0;
    save_pgm(path, mask.width, mask.height, bytes);
}

nlohmann::json alarms_to_json(const std::vector<AlarmRegion>& alarms) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& a : alarms) {
        out.push_back({{"component_id", a.component_id},
                       {"pixel_count", a.pixel_count},
                       {"bbox", {a.bbox.x_min, a.bbox.y_min, a.bbox.x_max, a.bbox.y_max}}});
    }
    return out;
}

}  // namespace eadf
