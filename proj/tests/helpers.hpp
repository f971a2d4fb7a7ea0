#pragma once

#include "seqdesign/design.hpp"
#include "seqdesign/model.hpp"

#include <Eigen/Core>

#include <initializer_list>
#include <vector>

namespace testing {

inline seqdesign::Point pt(std::initializer_list<double> v) {
    seqdesign::Point x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double c : v) x[i++] = c;
    return x;
}

inline seqdesign::Point pt1(double d) { return pt({d}); }

inline seqdesign::Design design1(std::vector<double> xs, std::vector<double> ws) {
    std::vector<seqdesign::Point> pts;
    for (double x : xs) pts.push_back(pt1(x));
    return seqdesign::Design(pts, ws);
}

// Support point of a 1-d design closest to x.
inline double nearest(const seqdesign::Design& d, double x) {
    double best = d.point(0)[0];
    for (const auto& p : d.points()) {
        if (std::abs(p[0] - x) < std::abs(best - x)) best = p[0];
    }
    return best;
}

}  // namespace testing
