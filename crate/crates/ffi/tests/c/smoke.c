#include <math.h>
#include <stdio.h>
#include <string.h>

#include "spiraldim.h"

#define CHECK(cond)                                                    \
    do {                                                               \
        if (!(cond)) {                                                 \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(void) {
    SdSequence *seq = NULL;
    SdLadder *ladder = NULL;
    SdEstimate est;
    int64_t bound = 0;
    double d = 0.0;

    CHECK(sd_sequence_power(1.0, 1000000, &seq) == SD_STATUS_OK);
    CHECK(sd_sequence_len(seq) == 1000000);
    CHECK(sd_ladder_new(1e-6, 1e-2, 24, &ladder) == SD_STATUS_OK);
    CHECK(sd_sequence_dimension(seq, ladder, &est) == SD_STATUS_OK);
    CHECK(fabs(est.fit - 0.5) < 0.03);

    CHECK(sd_cyclicity_bound(1.5, 0.5, &bound) == SD_STATUS_OK && bound == 4);
    CHECK(sd_saddle_loop_dim(6, &d) == SD_STATUS_OK && fabs(d - 5.0 / 3.0) < 1e-15);
    CHECK(sd_cyclicity_bound(2.5, 0.5, &bound) == SD_STATUS_INVALID_PARAMETER);
    CHECK(sd_last_error() != NULL && strstr(sd_last_error(), "`d`") != NULL);

    sd_ladder_free(ladder);
    sd_sequence_free(seq);
    puts("ok");
    return 0;
}
