#include <math.h>
#include <stdio.h>

#include "yamabe_lab.h"

static int check(YlStatus s, const char *what) {
    if (s != YL_STATUS_OK) {
        const char *msg = yl_last_error();
        fprintf(stderr, "%s: status %d: %s\n", what, (int)s, msg ? msg : "(none)");
        return 1;
    }
    return 0;
}

int main(void) {
    YlMetric *m = NULL;
    if (check(yl_metric_hemisphere(3, 64, &m), "hemisphere")) return 1;
    double r[65];
    if (check(yl_metric_scalar_curvature(m, r, 65), "curvature")) return 1;

    YlSolution *s = NULL;
    if (check(yl_solve(m, 5.0, &s), "solve")) return 1;
    double y = 0.0;
    if (check(yl_solution_y(s, &y), "y")) return 1;
    double exact = 6.0 * pow(acos(-1.0), 4.0 / 3.0);
    if (fabs(y - exact) > 1e-3 * exact) {
        fprintf(stderr, "Y = %.10f, expected %.10f\n", y, exact);
        return 1;
    }

    double small[4];
    if (yl_solution_u(s, small, 4) != YL_STATUS_BUFFER_TOO_SMALL || yl_last_error() == NULL) return 1;

    YlReport *rep = NULL;
    if (check(yl_verify("{\"kind\": \"cylinder\"}", 3, 32, 2.0, 0.0, &rep), "verify")) return 1;
    YlReportSummary sum;
    if (check(yl_report_summary(rep, &sum), "summary")) return 1;
    if (!sum.passed || fabs(sum.rhs - 8.0 / 3.0) > 1e-6) return 1;
    char *json = NULL;
    if (check(yl_report_json(rep, &json), "json")) return 1;
    printf("%.40s\n", json);

    yl_string_free(json);
    yl_report_free(rep);
    yl_solution_free(s);
    yl_metric_free(m);
    return 0;
}
