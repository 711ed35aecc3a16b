"""
Search spaces, sampling and configuration distance.
"""
import numpy as np

from mahpo.search_space import ModelFamily, default_space, distance, sample, validate

space = default_space(ModelFamily.LOGISTIC_REGRESSION)
print(space.to_json())

rng = np.random.default_rng(0)
configs = [sample(space, rng) for _ in range(5)]
for cfg in configs:
    print(cfg.dumps(), validate(space, cfg))

# c lives on a log scale, so distance is measured in decades
print("distance(0, 1) =", round(distance(space, configs[0], configs[1]), 3))

rf = default_space(ModelFamily.RANDOM_FOREST)
print(sample(rf, np.random.default_rng(1)).values)
