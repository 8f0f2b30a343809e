#include <math.h>
#include <stdio.h>
#include <string.h>

#include "impsep.h"

int main(void) {
    ImpsepSeparator *sep = NULL;
    if (impsep_separator_new(NULL, &sep) != IMPSEP_STATUS_OK) return 1;

    enum { N = 4000 };
    static double x[N], imp[N], sta[N];
    for (int i = 0; i < N; i++) x[i] = 0.1 * sin(0.05 * i) + (i == 2000 ? 0.9 : 0.0);
    if (impsep_separate_hpss(sep, x, N, 16000, imp, sta) != IMPSEP_STATUS_OK) return 2;
    for (int i = 0; i < N; i++)
        if (fabs(x[i] - imp[i] - sta[i]) > 1e-9) return 3;

    double ref[2] = {1.0, 0.0}, est[2] = {1.0, 1.0}, db = -1.0;
    if (impsep_si_sdr(est, ref, 2, &db) != IMPSEP_STATUS_OK || db != 0.0) return 4;
    if (impsep_si_sdr(NULL, ref, 2, &db) != IMPSEP_STATUS_NULL_POINTER) return 5;
    if (strstr(impsep_last_error_message(), "null") == NULL) return 6;

    impsep_separator_free(sep);
    printf("impsep %s schema %u ok\n", impsep_version(), impsep_schema_version());
    return 0;
}
