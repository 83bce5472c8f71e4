#include "karyoseg/config.h"

#include "karyoseg/error.h"

namespace karyoseg {

void PipelineConfig::validate() const {
    require(median_window >= 3 && median_window % 2 == 1, "median_window must be odd and >= 3");
    require(canny_aperture == 3 || canny_aperture == 5 || canny_aperture == 7,
            "canny_aperture must be 3, 5 or 7");
    require(canny_low >= 0.0 && canny_low <= canny_high, "canny thresholds must satisfy 0 <= low <= high");
    require(gradient_kernel_width >= 1 && gradient_kernel_height >= 1, "gradient kernel must be non-empty");
    require(min_contour_area >= 0.0, "min_contour_area must be non-negative");
    require(merge_radius >= 0.0, "merge_radius must be non-negative");
    require(spur_excess >= 0.0, "spur_excess must be non-negative");
    require(bridge_length >= 0, "bridge_length must be non-negative");
    require(classes >= 1, "classes must be positive");
    require(expected_total >= 0, "expected_total must be non-negative");
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
    j = nlohmann::json{{"median_window", c.median_window},
                       {"canny_aperture", c.canny_aperture},
                       {"canny_low", c.canny_low},
                       {"canny_high", c.canny_high},
                       {"gradient_kernel", {c.gradient_kernel_width, c.gradient_kernel_height}},
                       {"min_contour_area", c.min_contour_area},
                       {"merge_radius", c.merge_radius},
                       {"spur_excess", c.spur_excess},
                       {"bridge_length", c.bridge_length},
                       {"classes", c.classes},
                       {"expected_total", c.expected_total}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
    require(j.is_object(), "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "median_window") c.median_window = value.get<int>();
        else if (key == "canny_aperture") c.canny_aperture = value.get<int>();
        else if (key == "canny_low") c.canny_low = value.get<double>();
        else if (key == "canny_high") c.canny_high = value.get<double>();
        else if (key == "gradient_kernel") {
            require(value.is_array() && value.size() == 2, "gradient_kernel must be [width, height]");
            c.gradient_kernel_width = value[0].get<int>();
            c.gradient_kernel_height = value[1].get<int>();
        } else if (key == "min_contour_area") c.min_contour_area = value.get<double>();
        else if (key == "merge_radius") c.merge_radius = value.get<double>();
        else if (key == "spur_excess") c.spur_excess = value.get<double>();
        else if (key == "bridge_length") c.bridge_length = value.get<int>();
        else if (key == "classes") c.classes = value.get<int>();
        else if (key == "expected_total") c.expected_total = value.get<int>();
        else fail(ErrorCode::InvalidArgument, "unknown config key: " + key);
    }
    c.validate();
}

}  // namespace karyoseg
