#include <stdio.h>
#include <string.h>

#include "heston_unbiased.h"

static const char *CONFIG =
    "{\"heston\": {\"k\": 2.8, \"theta\": 0.05, \"sigma\": 0.25, \"rho\": 0.5, \"s0\": 1, \"v0\": 0.04, \"t\": 1},"
    " \"rate\": {\"type\": \"cir\", \"alpha\": 1.2, \"beta\": 0.06, \"gamma\": 0.25, \"r0\": 0.05, \"scheme\": \"exact\"},"
    " \"payoffs\": [{\"type\": \"put\", \"strike\": 1}, {\"type\": \"digital_call\", \"strike\": 1}]}";

int main(void) {
    HuEngine *engine = NULL;
    if (hu_engine_new(CONFIG, &engine) != HU_STATUS_OK) {
        char msg[256];
        hu_last_error_message(msg, sizeof msg);
        fprintf(stderr, "config: %s\n", msg);
        return 1;
    }
    size_t errors = 0, warnings = 0;
    if (hu_engine_validate(engine, &errors, &warnings) != HU_STATUS_OK) {
        hu_engine_free(engine);
        return 1;
    }
    for (size_t i = 0; i < hu_engine_payoff_count(engine); ++i) {
        HuPriceResult r;
        HuStatus s = hu_engine_price(engine, i, 20000, 42, 1, &r);
        if (s != HU_STATUS_OK) {
            hu_engine_free(engine);
            return 2;
        }
        printf("%zu %.10f %.10f %.4f\n", i, r.mean, r.std_error, r.avg_work);
    }
    HuPriceResult r;
    HuStatus s = hu_engine_price(engine, 5, 100, 1, 1, &r);
    printf("out_of_range %d\n", (int)s);
    hu_engine_free(engine);
    printf("version %s\n", hu_version());
    return 0;
}
