#pragma once

#include <json.hpp>

namespace karyoseg {

/// Tunables for the whole pipeline. Defaults follow the reference workflow:
/// Canny aperture 5 and a 2x2 gradient kernel. The Canny hysteresis pair has
/// no published value and is exposed here rather than fixed.
struct PipelineConfig {
    int median_window = 3;
    int canny_aperture = 5;
    double canny_low = 400.0;
    double canny_high = 1200.0;
    int gradient_kernel_width = 2;
    int gradient_kernel_height = 2;
    double min_contour_area = 40.0;
    double merge_radius = 3.0;
    /// A free-tip skeleton branch is removed before branch-point detection when
    /// its tip lies at most this many pixels beyond the inscribed radius at
    /// its junction. Such branches come from edge bumps and bend corners.
    double spur_excess = 0.0;
    /// Two junctions joined by a skeleton path of at most this many pixels are
    /// reported as one crossing. A shallow X thins into two Y-junctions whose
    /// separation grows as the angle shrinks. 0 disables bridging.
    int bridge_length = 48;
    int classes = 23;
    int expected_total = 46;

    /// Throws InvalidArgument when a field violates its operator's preconditions.
    void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, PipelineConfig& c);

}  // namespace karyoseg
