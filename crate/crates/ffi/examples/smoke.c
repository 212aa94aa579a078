#include <stdio.h>
#include "hetmarket.h"

int main(void) {
    HmSimulation *sim = NULL;
    if (hm_simulation_new("steps = 10", 0, &sim) != HM_STATUS_OK) {
        fprintf(stderr, "new: %s\n", hm_last_error_message());
        return 1;
    }
    HmStepInfo info;
    for (int t = 0; t < 10; t++) {
        if (hm_simulation_step(sim, &info) != HM_STATUS_OK) {
            fprintf(stderr, "step: %s\n", hm_last_error_message());
            hm_simulation_free(sim);
            return 1;
        }
    }
    double prices[3];
    hm_simulation_prices(sim, prices, 3);
    printf("step %zu prices %.6f %.6f %.6f w_c %.6f\n", info.step, prices[0], prices[1], prices[2],
           info.share_chartist);
    hm_simulation_free(sim);
    return 0;
}
