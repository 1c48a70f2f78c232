/* Runs one simulated minute of the baseline preset and prints farm energy. */
#include <stdio.h>

#include "fowfsim.h"

int main(void) {
    FowfsimConfig *cfg = NULL;
    FowfsimRun *run = NULL;
    FowfsimMetrics m;
    FowfsimStatus s = fowfsim_config_load("preset:baseline", &cfg);
    if (s == FOWFSIM_STATUS_OK) s = fowfsim_config_set_duration(cfg, 60.0);
    if (s == FOWFSIM_STATUS_OK) s = fowfsim_run(cfg, &run);
    if (s == FOWFSIM_STATUS_OK) s = fowfsim_run_metrics(run, &m);
    if (s != FOWFSIM_STATUS_OK) {
        fprintf(stderr, "error %d: %s\n", (int)s, fowfsim_last_error());
    } else {
        printf("fowfsim %s: %zu turbines, %.3e J\n", fowfsim_version(), m.turbines,
               m.total_energy);
    }
    fowfsim_run_free(run);
    fowfsim_config_free(cfg);
    return (int)s;
}
