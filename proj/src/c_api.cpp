#include "syntheon/c_api.h"

#include "syntheon/syntheon.hpp"

#include <mutex>

struct syntheon_stream
{
    syntheon::AugmentedStream stream;
    std::mutex next_lock;
};

namespace
{

thread_local std::string g_last_error;

int status_of(std::string_view kind)
{
    if (kind == "io") return SYNTHEON_ERR_IO;
    if (kind == "parse") return SYNTHEON_ERR_PARSE;
    if (kind == "range") return SYNTHEON_ERR_RANGE;
    if (kind == "empty") return SYNTHEON_ERR_EMPTY;
    if (kind == "config") return SYNTHEON_ERR_CONFIG;
    if (kind == "version") return SYNTHEON_ERR_VERSION;
    return SYNTHEON_ERR_INTERNAL;
}

template <class F>
int guarded(F&& f)
{
    try {
        f();
        g_last_error.clear();
        return SYNTHEON_OK;
    } catch (const syntheon::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SYNTHEON_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SYNTHEON_ERR_INTERNAL;
    }
}

int argument_error(const char* what)
{
    g_last_error = what;
    return SYNTHEON_ERR_ARGUMENT;
}

void fill(const syntheon::AugmentedStream& stream, const syntheon::AugmentedSample& s, syntheon_sample* out)
{
    const auto& src = stream.clean()[s.provenance.source_index];
    auto copy = [](const auto& v, auto* dst) {
        if (dst)
            std::copy(v.begin(), v.end(), dst);
    };
    copy(s.rgb.data(), out->rgb);
    copy(s.lightness.data(), out->lightness);
    copy(src.normal.data(), out->normal);
    copy(src.depth.data(), out->depth);
    copy(src.semantic.data(), out->semantic);
    const auto& q = s.provenance.pose.rotation;
    out->pose_quaternion[0] = q.w;
    out->pose_quaternion[1] = q.x;
    out->pose_quaternion[2] = q.y;
    out->pose_quaternion[3] = q.z;
    out->pose_radius = s.provenance.pose.radius;
    out->inplane_deg = s.provenance.pose.inplane_deg;
    out->class_id = s.provenance.class_id;
    out->seed = s.provenance.seed;
    out->source_index = s.provenance.source_index;
}

} // namespace

extern "C" {

int32_t syntheon_abi_version(void) { return SYNTHEON_ABI_VERSION; }

const char* syntheon_version(void) { return syntheon::engine_version; }

const char* syntheon_last_error(void) { return g_last_error.c_str(); }

int syntheon_stream_open(const char* clean_dir, uint64_t global_seed, const char* patch_dir, uint32_t workers,
                         syntheon_stream** out)
{
    if (!clean_dir || !out)
        return argument_error("syntheon_stream_open: null argument");
    *out = nullptr;
    return guarded([&] {
        auto data = syntheon::load_clean_dataset(clean_dir, std::max(1u, workers));
        std::shared_ptr<const syntheon::PatchCorpus> corpus;
        if (patch_dir) {
            auto c = std::make_shared<syntheon::PatchCorpus>(syntheon::PatchCorpus::open(patch_dir));
            if (c->empty())
                throw syntheon::Error("config", "patch corpus has no PNG images");
            corpus = std::move(c);
        }
        *out = new syntheon_stream{
            syntheon::AugmentedStream(std::make_shared<const std::vector<syntheon::ModalityStack>>(
                                          std::move(data.stacks)),
                                      global_seed, workers, std::move(corpus)),
            {}};
    });
}

int syntheon_stream_shape(const syntheon_stream* s, int32_t* width, int32_t* height, uint64_t* clean_count)
{
    if (!s)
        return argument_error("syntheon_stream_shape: null stream");
    if (width)
        *width = s->stream.support().width;
    if (height)
        *height = s->stream.support().height;
    if (clean_count)
        *clean_count = s->stream.clean_size();
    return SYNTHEON_OK;
}

int syntheon_stream_sample(const syntheon_stream* s, uint64_t index, syntheon_sample* out)
{
    if (!s || !out)
        return argument_error("syntheon_stream_sample: null argument");
    return guarded([&] { fill(s->stream, s->stream.sample_at(index), out); });
}

int syntheon_stream_next(syntheon_stream* s, syntheon_sample* out)
{
    if (!s || !out)
        return argument_error("syntheon_stream_next: null argument");
    return guarded([&] {
        std::lock_guard lock(s->next_lock);
        fill(s->stream, s->stream.next(), out);
    });
}

int syntheon_stream_noise_record(const syntheon_stream* s, uint64_t index, char* buffer, size_t capacity,
                                 size_t* needed)
{
    if (!s)
        return argument_error("syntheon_stream_noise_record: null stream");
    return guarded([&] {
        const std::string rec = syntheon::to_record(s->stream.noise_at(index));
        if (needed)
            *needed = rec.size() + 1;
        if (buffer && capacity > 0) {
            if (capacity < rec.size() + 1)
                throw syntheon::Error("range", "noise record buffer too small");
            std::memcpy(buffer, rec.c_str(), rec.size() + 1);
        }
    });
}

void syntheon_stream_close(syntheon_stream* s) { delete s; }

int syntheon_triplet_loss(const double* anchor, const double* positive, const double* negative, size_t dim,
                          double margin, double* out)
{
    if (!anchor || !positive || !negative || !out)
        return argument_error("syntheon_triplet_loss: null argument");
    return guarded([&] {
        *out = syntheon::triplet_loss({anchor, dim}, {positive, dim}, {negative, dim}, margin);
    });
}

int syntheon_icpe_margin(int32_t class_b, int32_t class_p, const double q_b[4], const double q_p[4], double n,
                         double* out)
{
    if (!q_b || !q_p || !out)
        return argument_error("syntheon_icpe_margin: null argument");
    return guarded([&] {
        *out = syntheon::icpe_margin(class_b, class_p, {q_b[0], q_b[1], q_b[2], q_b[3]},
                                     {q_p[0], q_p[1], q_p[2], q_p[3]}, n);
    });
}

int syntheon_self_attention(const double* x, int32_t channels, int32_t height, int32_t width, const double* query,
                            const double* key, int32_t cbar, const double* value, double gamma, double* out,
                            double* attention)
{
    if (!x || !query || !key || !value || !out)
        return argument_error("syntheon_self_attention: null argument");
    if (channels <= 0 || height <= 0 || width <= 0 || cbar <= 0)
        return argument_error("syntheon_self_attention: dimensions must be positive");
    return guarded([&] {
        syntheon::FeatureMap fm(channels, height, width);
        std::copy(x, x + fm.values.size(), fm.values.begin());
        syntheon::AttentionWeights w{syntheon::Matrix(cbar, channels), syntheon::Matrix(cbar, channels),
                                     syntheon::Matrix(channels, channels), gamma};
        std::copy(query, query + w.query.values.size(), w.query.values.begin());
        std::copy(key, key + w.key.values.size(), w.key.values.begin());
        std::copy(value, value + w.value.values.size(), w.value.values.begin());
        const auto r = syntheon::self_attention(fm, w);
        std::copy(r.output.values.begin(), r.output.values.end(), out);
        if (attention)
            std::copy(r.attention.values.begin(), r.attention.values.end(), attention);
    });
}

int syntheon_generative_loss(const float* pred, const float* target, size_t count, int32_t kind, double* out)
{
    if (!pred || !target || !out)
        return argument_error("syntheon_generative_loss: null argument");
    if (kind != SYNTHEON_LOSS_L1 && kind != SYNTHEON_LOSS_BCE)
        return argument_error("syntheon_generative_loss: unknown loss kind");
    return guarded([&] {
        *out = syntheon::generative_loss({pred, count}, {target, count},
                                         kind == SYNTHEON_LOSS_L1 ? syntheon::GenerativeLoss::l1
                                                                  : syntheon::GenerativeLoss::bce);
    });
}

} // extern "C"
