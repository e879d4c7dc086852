#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include "twistbench.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    TbStatus s_ = (call);                                                    \
    if (s_ != TB_STATUS_OK) {                                                \
      fprintf(stderr, "%s -> %d: %s\n", #call, s_, tb_last_error_message()); \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  const char *spacetime =
      "{\"interval\": [-2.0, 2.0],"
      " \"fiber\": {\"dim\": 1, \"periods\": [1.0], \"resolution\": [64]},"
      " \"twist\": {\"family\": \"separable\", \"g\": {\"kind\": \"gauss\"},"
      "             \"epsilon\": 0.1, \"s\": [{\"coeff\": 1.0, \"wave\": [1]}]}}";
  TbModel *model = NULL;
  CHECK(tb_model_from_json(spacetime, &model));
  size_t n = 0;
  CHECK(tb_model_node_count(model, &n));
  double *u = malloc(n * sizeof(double));
  for (size_t i = 0; i < n; i++) u[i] = 0.3 + 0.05 * sin(2.0 * M_PI * i / n);

  TbSolve *solve = NULL;
  CHECK(tb_solve(model, NULL, u, n, &solve));
  TbOutcome outcome;
  CHECK(tb_solve_outcome(solve, &outcome));
  double residual = 0.0;
  CHECK(tb_solve_residual(solve, &residual));
  CHECK(tb_solve_copy_solution(solve, u, n));
  double worst = 0.0;
  for (size_t i = 0; i < n; i++) worst = fmax(worst, fabs(u[i]));
  if (outcome != TB_OUTCOME_CONVERGED || residual > 1e-10 || worst > 1e-6) {
    fprintf(stderr, "outcome %d residual %g max|u| %g\n", outcome, residual, worst);
    return 1;
  }
  if (tb_model_from_json("{}", &model) != TB_STATUS_CONFIG || model != NULL) return 1;
  printf("twistbench %s: converged, residual %.1e\n", tb_version(), residual);
  tb_solve_free(solve);
  free(u);
  return 0;
}
