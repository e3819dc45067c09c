#ifndef SYNTHEON_MATHKERNELS_HPP
#define SYNTHEON_MATHKERNELS_HPP

// Forward reference kernels for the training objectives: triplet loss with the
// pose-aware margin, SAGAN-style self-attention, and the per-modality generative losses.

#include "syntheon/geometry.hpp"

#include <limits>
#include <numbers>
#include <span>

namespace syntheon
{

using Embedding = std::vector<double>;

inline double squared_distance(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw Error("range", "embedding dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// max(0, 1 - |b - n|^2 / (|b - p|^2 + m)).
inline double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, double margin)
{
    if (!(margin >= 0.0))
        throw Error("range", "triplet_loss: margin must be >= 0");
    const double pos = squared_distance(anchor, positive);
    const double neg = squared_distance(anchor, negative);
    const double denom = pos + margin;
    if (!(denom > 0.0))
        throw Error("range", "triplet_loss: zero denominator (anchor == positive with zero margin)");
    return std::max(0.0, 1.0 - neg / denom);
}

/// Same class: the angle between the two poses, 2 acos|q_b . q_p|. Otherwise the fixed
/// inter-class margin n, which must exceed pi so that it dominates every pose margin.
inline double icpe_margin(int class_b, int class_p, const Quaternion& q_b, const Quaternion& q_p, double n)
{
    if (!(n > std::numbers::pi))
        throw Error("range", "icpe_margin: inter-class margin must be > pi");
    return class_b == class_p ? quat_angular_distance(q_b, q_p) : n;
}

/// Row-major dense matrix.
struct Matrix
{
    int rows = 0, cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// C x H x W feature map, channel-major: values[c * H * W + y * W + x].
struct FeatureMap
{
    int channels = 0, height = 0, width = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, fill)
    {
    }

    int positions() const { return height * width; }
    double& at(int c, int i) { return values[static_cast<std::size_t>(c) * positions() + i]; }
    double at(int c, int i) const { return values[static_cast<std::size_t>(c) * positions() + i]; }
};

/// Learned parameters of one self-attention block. W_f, W_g: Cbar x C; W_h: C x C.
struct AttentionWeights
{
    Matrix query;  ///< W_f
    Matrix key;    ///< W_g
    Matrix value;  ///< W_h
    double gamma = 0.0;

    /// Default reduced width Cbar = floor(C / 8), at least 1.
    static int reduced_channels(int channels) { return std::max(1, channels / 8); }
};

struct AttentionResult
{
    FeatureMap output;
    /// beta(j, i): weight of position i in output position j; each row sums to 1.
    Matrix attention;
};

/// x_sa = x + gamma * (W_h x) beta^T with s_ij = (W_f x)_i . (W_g x)_j and
/// beta(j, .) = softmax_i s_ij, so output position j adds a convex combination of
/// the value vectors.
inline AttentionResult self_attention(const FeatureMap& x, const AttentionWeights& w)
{
    const int c = x.channels, n = x.positions();
    if (static_cast<std::size_t>(c) * n != x.values.size() || c <= 0 || n <= 0)
        throw Error("range", "self_attention: malformed feature map");
    const int reduced = w.query.rows;
    if (w.query.cols != c || w.key.cols != c || w.key.rows != reduced || reduced <= 0 || w.value.rows != c ||
        w.value.cols != c)
        throw Error("range", "self_attention: weight shapes do not match the channel count");

    auto project = [&](const Matrix& m) {
        Matrix out(m.rows, n);
        for (int r = 0; r < m.rows; ++r)
            for (int k = 0; k < c; ++k) {
                const double wk = m(r, k);
                for (int i = 0; i < n; ++i)
                    out(r, i) += wk * x.at(k, i);
            }
        return out;
    };
    const Matrix f = project(w.query);
    const Matrix g = project(w.key);
    const Matrix h = project(w.value);

    AttentionResult res{x, Matrix(n, n)};
    std::vector<double> scores(n);
    for (int j = 0; j < n; ++j) {
        double top = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int r = 0; r < reduced; ++r)
                s += f(r, i) * g(r, j);
            scores[i] = s;
            top = std::max(top, s);
        }
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            scores[i] = std::exp(scores[i] - top);
            total += scores[i];
        }
        for (int i = 0; i < n; ++i)
            res.attention(j, i) = scores[i] / total;
    }
    if (w.gamma == 0.0)
        return res;
    for (int ch = 0; ch < c; ++ch)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += res.attention(j, i) * h(ch, i);
            res.output.at(ch, j) += w.gamma * acc;
        }
    return res;
}

enum class GenerativeLoss { l1, bce };

/// l1: mean |pred - target|. bce: mean binary cross-entropy; pred must lie strictly in
/// (0, 1) (clamp with 1e-7 beforehand) and target in {0, 1}.
inline double generative_loss(std::span<const float> pred, std::span<const float> target, GenerativeLoss kind)
{
    if (pred.size() != target.size() || pred.empty())
        throw Error("range", "generative_loss: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred[i], t = target[i];
        if (kind == GenerativeLoss::l1) {
            sum += std::abs(p - t);
            continue;
        }
        if (!(p > 0.0 && p < 1.0))
            throw Error("range", "generative_loss: bce prediction outside (0, 1)");
        if (t != 0.0 && t != 1.0)
            throw Error("range", "generative_loss: bce target must be 0 or 1");
        sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    return sum / static_cast<double>(pred.size());
}

inline double generative_loss(const Image& pred, const Image& target, GenerativeLoss kind)
{
    if (!pred.same_shape(target))
        throw Error("range", "generative_loss: shape mismatch");
    return generative_loss(std::span<const float>(pred.data()), std::span<const float>(target.data()), kind);
}

} // namespace syntheon

#endif // SYNTHEON_MATHKERNELS_HPP
