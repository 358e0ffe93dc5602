#include <stdio.h>
#include "relopt.h"

int main(void) {
    const char *json = "{\"model_type\":\"ou\",\"ou\":{\"kappa\":2.0,\"theta\":100.0,\"sigma\":40.0}}";
    RoModel *m = NULL;
    if (ro_model_from_json(json, &m) != RO_STATUS_OK) {
        fprintf(stderr, "%s\n", ro_last_error());
        return 1;
    }
    RoContractTerms t = {1.0, 1.0, 1.0 / 365.0, 100.0, 0.03, 1.0};
    RoPremium p;
    double closed = 0.0, annual = 0.0;
    if (ro_premium(m, 60.0, -1, &t, 10000, 7, &p) != RO_STATUS_OK ||
        ro_ou_strip_closed_form(2.0, 100.0, 40.0, 60.0, &t, &closed) != RO_STATUS_OK ||
        ro_levelize_annual(p.premium, t.r, t.tau, RO_LEVELIZE_MODE_START_OF_YEAR, &annual) != RO_STATUS_OK) {
        fprintf(stderr, "%s\n", ro_last_error());
        ro_model_free(m);
        return 1;
    }
    printf("premium %.2f (se %.2f), closed form %.2f, levelized %.2f\n", p.premium, p.std_error, closed, annual);
    ro_model_free(m);

    double bad = 0.0;
    if (ro_levelize_annual(1.0, 0.01, 6.0, 9, &bad) != RO_STATUS_INVALID_ARGUMENT) {
        return 1;
    }
    return 0;
}
