#include <math.h>
#include <stdio.h>
#include "kernseq.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        KsStatus s_ = (call);                                              \
        if (s_ != KS_STATUS_OK) {                                          \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,              \
                    ks_last_error_message());                              \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    double data[8 * 3];
    for (int i = 0; i < 8 * 3; i++) data[i] = (double)((i * 7) % 11) + 1.0;

    KsEmbedding *e = NULL;
    KsKernelMatrix *k = NULL;
    KsTsneResult *r = NULL;
    CHECK(ks_embedding_from_rows(data, 8, 3, &e));

    KsKernelParams p = ks_kernel_params_default(KS_KERNEL_KIND_GAUSSIAN);
    CHECK(ks_kernel_matrix(e, &p, &k));
    double kv[64];
    CHECK(ks_kernel_copy_values(k, kv, 64));
    if (fabs(kv[0] - 1.0) > 1e-12) return 2;

    KsTsneConfig c = ks_tsne_config_default();
    c.max_iter = 100;
    CHECK(ks_tsne_run(k, &c, &r));
    double y[16];
    CHECK(ks_tsne_result_copy_coords(r, y, 16));
    if (!isfinite(ks_tsne_result_final_kl(r))) return 3;

    if (ks_kernel_copy_values(k, kv, 3) != KS_STATUS_INVALID_ARGUMENT) return 4;

    ks_tsne_result_free(r);
    ks_kernel_free(k);
    ks_embedding_free(e);
    printf("ok %s\n", ks_version());
    return 0;
}
