from cantor_rgg import ExperimentConfig, Target, make_params, run_l1_rate

config = ExperimentConfig(
    params=make_params("1/3"),
    n_grid=(64, 128, 256, 512),
    replicates=2000,
    master_seed=1,
    targets=(Target.L1_RATE,),
)
result = run_l1_rate(config, workers=0)

for row in result.select("ratio_to_2a_n"):
    print(f"n={row.n}: E|R_n - 1/3| / 2a_n = {row.estimate:.4f} +- {row.stderr:.4f}")
print(result.row("loglog_slope", 512))
