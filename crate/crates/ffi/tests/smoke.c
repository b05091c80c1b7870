#include <math.h>
#include <stdio.h>

#include "critdrift.h"

int main(void) {
    CdConstants k;
    if (cd_constants(2.0, 4.0, 1.0, &k) != CD_STATUS_OK) return 1;
    if (fabs(k.c_grad - 1.6685814329591031) > 1e-12) return 2;
    if (cd_constants(2.0, 1.0, 1.0, &k) != CD_STATUS_DOMAIN) return 3;
    char msg[256];
    if (cd_last_error(msg, sizeof msg) == 0) return 4;
    printf("c_grad %.15f; rejected: %s\n", k.c_grad, msg);
    return 0;
}
