#ifndef SYNTHEON_C_API_H
#define SYNTHEON_C_API_H

/* Flat C interface for language bindings. All functions return a status code; on
   failure syntheon_last_error() describes the error of the calling thread. Buffers are
   owned by the caller. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SYNTHEON_ABI_VERSION 1

enum syntheon_status {
    SYNTHEON_OK = 0,
    SYNTHEON_ERR_IO = 1,
    SYNTHEON_ERR_PARSE = 2,
    SYNTHEON_ERR_RANGE = 3,
    SYNTHEON_ERR_EMPTY = 4,
    SYNTHEON_ERR_CONFIG = 5,
    SYNTHEON_ERR_VERSION = 6,
    SYNTHEON_ERR_ARGUMENT = 7,
    SYNTHEON_ERR_INTERNAL = 8
};

enum syntheon_generative_loss { SYNTHEON_LOSS_L1 = 0, SYNTHEON_LOSS_BCE = 1 };

typedef struct syntheon_stream syntheon_stream;

/* Output slots for one augmented sample. Any pointer may be NULL to skip that field.
   Sizes: rgb and normal 3*w*h (interleaved), lightness, depth and semantic w*h. */
typedef struct syntheon_sample {
    float* rgb;        /* [-1, 1] */
    float* lightness;  /* [0, 1] */
    float* normal;     /* clean normal map of the source view */
    float* depth;      /* mm */
    uint8_t* semantic;
    double pose_quaternion[4]; /* w, x, y, z: camera axes to world */
    double pose_radius;
    double inplane_deg;
    int32_t class_id;
    uint64_t seed;
    uint64_t source_index;
} syntheon_sample;

int32_t syntheon_abi_version(void);
const char* syntheon_version(void);
const char* syntheon_last_error(void);

/* Opens the clean dataset in `clean_dir`. `patch_dir` may be NULL (procedural backgrounds). */
int syntheon_stream_open(const char* clean_dir, uint64_t global_seed, const char* patch_dir, uint32_t workers,
                         syntheon_stream** out);
int syntheon_stream_shape(const syntheon_stream* s, int32_t* width, int32_t* height, uint64_t* clean_count);
/* Sample `index` of the stream; independent of call order. */
int syntheon_stream_sample(const syntheon_stream* s, uint64_t index, syntheon_sample* out);
/* Next sample in index order, starting at 0. */
int syntheon_stream_next(syntheon_stream* s, syntheon_sample* out);
/* Canonical noise-vector record of sample `index`. `*needed` receives the size including NUL. */
int syntheon_stream_noise_record(const syntheon_stream* s, uint64_t index, char* buffer, size_t capacity,
                                 size_t* needed);
void syntheon_stream_close(syntheon_stream* s);

int syntheon_triplet_loss(const double* anchor, const double* positive, const double* negative, size_t dim,
                          double margin, double* out);
int syntheon_icpe_margin(int32_t class_b, int32_t class_p, const double q_b[4], const double q_p[4], double n,
                         double* out);
/* x: C*H*W channel-major. query, key: cbar*C row-major; value: C*C. out: C*H*W.
   attention (optional): (H*W)^2, row j holds the weights of output position j. */
int syntheon_self_attention(const double* x, int32_t channels, int32_t height, int32_t width, const double* query,
                            const double* key, int32_t cbar, const double* value, double gamma, double* out,
                            double* attention);
int syntheon_generative_loss(const float* pred, const float* target, size_t count, int32_t kind, double* out);

#ifdef __cplusplus
}
#endif

#endif /* SYNTHEON_C_API_H */
