#include "karyoseg/image.h"

namespace karyoseg {

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
    require(a.width() == b.width() && a.height() == b.height(), "mask dimensions differ");
}

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
    require_same_shape(a, b);
    BinaryMask out(a.width(), a.height());
    auto da = a.data();
    auto db = b.data();
    auto dout = out.data();
    for (std::size_t i = 0; i < dout.size(); ++i) dout[i] = op(da[i] != 0, db[i] != 0) ? 1 : 0;
    return out;
}

}  // namespace

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool x, bool y) { return x || y; });
}

BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool x, bool y) { return x && y; });
}

BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool x, bool y) { return x && !y; });
}

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b);
    std::size_t n = 0;
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) n += (da[i] && db[i]) ? 1 : 0;
    return n;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b);
    std::size_t inter = 0;
    std::size_t uni = 0;
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        inter += (da[i] && db[i]) ? 1 : 0;
        uni += (da[i] || db[i]) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

GrayImage mask_to_gray(const BinaryMask& mask) {
    GrayImage out(mask.width(), mask.height());
    auto src = mask.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 255 : 0;
    return out;
}

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::DegenerateHistogram: return "degenerate-histogram";
        case ErrorCode::DanglingIntersection: return "dangling-intersection";
        case ErrorCode::UnfillableGap: return "unfillable-gap";
        case ErrorCode::MissingScore: return "missing-score";
        case ErrorCode::LayoutFailure: return "layout-failure";
        case ErrorCode::Decode: return "decode-error";
        case ErrorCode::Io: return "io-error";
        case ErrorCode::NotFound: return "not-found";
        case ErrorCode::Conflict: return "conflict";
    }
    return "unknown";
}

}  // namespace karyoseg
