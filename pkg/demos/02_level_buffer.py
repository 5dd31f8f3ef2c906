"""
The prioritized level buffer
============================

Scores decide rank, ranks decide sampling weight, staleness keeps old
entries alive. Everything round-trips through a plain text checkpoint.
"""

import numpy as np

from ued_forge import (
    SamplerConfig,
    buffer_from_text,
    buffer_to_text,
    generate_random_level,
    insert_batch,
    new_buffer,
    sample_levels,
    sampling_weights,
    update_batch,
)
from ued_forge.rng import fold_in, generator, key_from_seed

KEY = key_from_seed(42)

levels = [generate_random_level(generator(fold_in(KEY, i)), 7, 7, 6)
          for i in range(6)]
scores = [0.9, 0.1, 0.5, 0.3, 0.7, 0.2]

buf = insert_batch(new_buffer(capacity=6), levels, scores)
print("buffer size", buf.size, "counter", buf.episode_counter)

# rank weights: highest score -> rank 1 -> largest weight, sharpened by
# the temperature; staleness_coeff mixes in a "not sampled lately" bonus
cfg = SamplerConfig(temperature=0.3, staleness_coeff=0.3)
w = sampling_weights(buf, cfg)
print("weights:", np.round(w, 4))
ranks = np.empty(buf.size, dtype=int)
ranks[np.argsort(-buf.scores[:buf.size])] = np.arange(1, buf.size + 1)
print("per-slot ranks:", ranks)

# draw a working set; drawn slots get their staleness reset
buf, idx, drawn = sample_levels(buf, cfg, generator(fold_in(KEY, 100)), 4)
print("sampled slots:", idx)

# replaying refreshes scores in place
buf = update_batch(buf, list(idx), [0.4, 0.4, 0.4, 0.4])
print("staleness after update:", buf.staleness())

# a better level evicts the current argmin score once the buffer is full
challenger = generate_random_level(generator(fold_in(KEY, 200)), 7, 7, 6)
buf2 = insert_batch(buf, [challenger], [0.95])
print("evicted the weakest slot; scores now", np.round(buf2.scores, 2))

# duplicates are score updates, not new slots
buf3 = insert_batch(buf2, [challenger], [0.99])
print("reinserting the same level keeps size at", buf3.size)

text = buffer_to_text(buf3)
print("checkpoint is", len(text.splitlines()), "lines of text; first three:")
print("\n".join(text.splitlines()[:3]))
assert buffer_to_text(buffer_from_text(text)) == text
print("round trip: byte-identical")
