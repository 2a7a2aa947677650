#include "inrpatch/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace inrpatch {

std::array<double, kFeatureDim> patch_features(const float* rgb, int w, int h) {
    std::array<double, kFeatureDim> f{};
    const int64_t npix = static_cast<int64_t>(w) * h;
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sum2 = 0.0;
        for (int64_t i = 0; i < npix; ++i) {
            const double v = rgb[i * 3 + c];
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / static_cast<double>(npix);
        f[static_cast<size_t>(c)] = mean;
        f[static_cast<size_t>(3 + c)] = std::sqrt(std::max(0.0, sum2 / static_cast<double>(npix) - mean * mean));
    }
    // gradient magnitude, then 2x2 block means, then their average
    const int bw = w / 2, bh = h / 2;
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int by = 0; by < bh; ++by)
            for (int bx = 0; bx < bw; ++bx) {
                double blk = 0.0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int y = 2 * by + dy, x = 2 * bx + dx;
                        const double v = rgb[(static_cast<int64_t>(y) * w + x) * 3 + c];
                        const double gx = x + 1 < w ? rgb[(static_cast<int64_t>(y) * w + x + 1) * 3 + c] - v : 0.0;
                        const double gy = y + 1 < h ? rgb[(static_cast<int64_t>(y + 1) * w + x) * 3 + c] - v : 0.0;
                        blk += std::sqrt(gx * gx + gy * gy);
                    }
                acc += blk / 4.0;
            }
        f[static_cast<size_t>(6 + c)] = bw > 0 && bh > 0 ? acc / (static_cast<double>(bw) * bh) : 0.0;
    }
    // high-frequency energy vs 4-neighbour average
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        int64_t cnt = 0;
        for (int y = 1; y + 1 < h; ++y)
            for (int x = 1; x + 1 < w; ++x) {
                const double v = rgb[(static_cast<int64_t>(y) * w + x) * 3 + c];
                const double nb = 0.25 * (rgb[(static_cast<int64_t>(y - 1) * w + x) * 3 + c] +
                                          rgb[(static_cast<int64_t>(y + 1) * w + x) * 3 + c] +
                                          rgb[(static_cast<int64_t>(y) * w + x - 1) * 3 + c] +
                                          rgb[(static_cast<int64_t>(y) * w + x + 1) * 3 + c]);
                acc += (v - nb) * (v - nb);
                ++cnt;
            }
        f[static_cast<size_t>(9 + c)] = cnt ? acc / static_cast<double>(cnt) : 0.0;
    }
    return f;
}

FeatureStats fit_stats(const std::vector<std::array<double, kFeatureDim>>& feats) {
    if (feats.empty()) throw std::invalid_argument("fit_stats: no feature vectors");
    const int d = kFeatureDim;
    FeatureStats s;
    s.dim = d;
    s.mu.assign(static_cast<size_t>(d), 0.0);
    s.cov.assign(static_cast<size_t>(d) * d, 0.0);
    const double n = static_cast<double>(feats.size());
    for (const auto& f : feats)
        for (int i = 0; i < d; ++i) s.mu[static_cast<size_t>(i)] += f[static_cast<size_t>(i)] / n;
    for (const auto& f : feats)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                s.cov[static_cast<size_t>(i) * d + j] +=
                    (f[static_cast<size_t>(i)] - s.mu[static_cast<size_t>(i)]) *
                    (f[static_cast<size_t>(j)] - s.mu[static_cast<size_t>(j)]) / n;
    return s;
}

std::vector<double> jacobi_eigen(std::vector<double> a, int d, std::vector<double>& v) {
    if (static_cast<int>(a.size()) != d * d) throw std::invalid_argument("jacobi_eigen: bad matrix size");
    v.assign(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) v[static_cast<size_t>(i) * d + i] = 1.0;
    auto at = [&](int i, int j) -> double& { return a[static_cast<size_t>(i) * d + j]; };
    auto vt = [&](int i, int j) -> double& { return v[static_cast<size_t>(i) * d + j]; };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-24) break;
        for (int p = 0; p < d - 1; ++p)
            for (int q = p + 1; q < d; ++q) {
                const double apq = at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < d; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    const double vkp = vt(k, p), vkq = vt(k, q);
                    vt(k, p) = c * vkp - s * vkq;
                    vt(k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<double> evals(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) evals[static_cast<size_t>(i)] = at(i, i);
    return evals;
}

namespace {

void check_symmetric(const std::vector<double>& c, int d, const char* which) {
    double scl = 1e-9;
    for (int i = 0; i < d; ++i) scl = std::max(scl, std::fabs(c[static_cast<size_t>(i) * d + i]));
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (std::fabs(c[static_cast<size_t>(i) * d + j] - c[static_cast<size_t>(j) * d + i]) > 1e-8 * scl)
                throw std::invalid_argument(std::string("pfd: covariance ") + which + " is not symmetric");
}

std::vector<double> matmul_d(const std::vector<double>& a, const std::vector<double>& b, int d) {
    std::vector<double> c(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            const double av = a[static_cast<size_t>(i) * d + k];
            for (int j = 0; j < d; ++j) c[static_cast<size_t>(i) * d + j] += av * b[static_cast<size_t>(k) * d + j];
        }
    return c;
}

// symmetric PSD square root via Jacobi, negative eigenvalues clamped to 0
std::vector<double> sqrtm_psd(const std::vector<double>& a, int d) {
    std::vector<double> v;
    std::vector<double> evals = jacobi_eigen(a, d, v);
    std::vector<double> out(static_cast<size_t>(d) * d, 0.0);
    for (int k = 0; k < d; ++k) {
        const double s = std::sqrt(std::max(0.0, evals[static_cast<size_t>(k)]));
        if (s == 0.0) continue;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                out[static_cast<size_t>(i) * d + j] += s * v[static_cast<size_t>(i) * d + k] * v[static_cast<size_t>(j) * d + k];
    }
    return out;
}

} // namespace

double pfd(const FeatureStats& a, const FeatureStats& b) {
    if (a.dim != b.dim || a.dim < 1) throw std::invalid_argument("pfd: dimension mismatch");
    const int d = a.dim;
    check_symmetric(a.cov, d, "A");
    check_symmetric(b.cov, d, "B");

    double mean_term = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dm = a.mu[static_cast<size_t>(i)] - b.mu[static_cast<size_t>(i)];
        mean_term += dm * dm;
    }
    std::vector<double> sa = sqrtm_psd(a.cov, d);
    std::vector<double> inner = matmul_d(matmul_d(sa, b.cov, d), sa, d);
    // symmetrize against roundoff before the second square root
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double m = 0.5 * (inner[static_cast<size_t>(i) * d + j] + inner[static_cast<size_t>(j) * d + i]);
            inner[static_cast<size_t>(i) * d + j] = m;
            inner[static_cast<size_t>(j) * d + i] = m;
        }
    std::vector<double> mid = sqrtm_psd(inner, d);
    double tr = 0.0;
    for (int i = 0; i < d; ++i)
        tr += a.cov[static_cast<size_t>(i) * d + i] + b.cov[static_cast<size_t>(i) * d + i] -
              2.0 * mid[static_cast<size_t>(i) * d + i];
    return std::max(0.0, mean_term + tr); // clamp roundoff-negative results
}

} // namespace inrpatch
