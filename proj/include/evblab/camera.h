// Copyright 2026 The evblab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVBLAB_CAMERA_H
#define EVBLAB_CAMERA_H

#include <cstdint>

namespace evblab {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Half-open pixel rectangle [x0, x0 + width) x [y0, y0 + height).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;

    bool contains(int x, int y) const { return x >= x0 && x < x0 + width && y >= y0 && y < y0 + height; }
    bool overlaps(const PixelRect& o) const {
        return x0 < o.x0 + o.width && o.x0 < x0 + width && y0 < o.y0 + o.height && o.y0 < y0 + height;
    }
    Point2 center() const { return {x0 + (width - 1) / 2.0, y0 + (height - 1) / 2.0}; }
    int area() const { return width * height; }

    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Sensor and the two beam regions; both beams share one time-tagging sensor.
struct CameraGeometry {
    int width = 256;
    int height = 256;
    PixelRect roi_signal{8, 8, 40, 40};
    PixelRect roi_idler{208, 208, 40, 40};
    Point2 centroid_s{27.5, 27.5};
    Point2 centroid_i{227.5, 227.5};
    double waist_px = 10.0;

    /// Throws std::invalid_argument for overlapping or out-of-bounds ROIs,
    /// sensor sizes beyond 16-bit pixel addresses, or a non-positive waist.
    void validate() const;

    friend bool operator==(const CameraGeometry&, const CameraGeometry&) = default;
};

enum class Region { Signal, Idler, Outside };

inline Region classify(const CameraGeometry& g, int x, int y) {
    if (g.roi_signal.contains(x, y)) {
        return Region::Signal;
    }
    if (g.roi_idler.contains(x, y)) {
        return Region::Idler;
    }
    return Region::Outside;
}

}  // namespace evblab

#endif
