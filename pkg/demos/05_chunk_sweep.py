"""How many chunks? Sweeping M on data whose cue recurs every T/8 frames.

With M = 8 every view holds exactly one occurrence of the cue. Fewer,
wider views mix several nuisance blocks into each view; more, narrower
views leave some views without the cue at all. One seed of the default
dataset; a few minutes.
"""

from mccaspeech.harness import Dataset, PipelineConfig, sweep_chunks
from mccaspeech.synth import SynthConfig, generate

data = Dataset.from_synth(generate(SynthConfig()))
result = sweep_chunks(data, [4, 8, 12, 24], [4], PipelineConfig(seeds=[0]))
print(result.to_csv(), end="")
print("best M:", result.best())
