"""Message bill for one finalized block, overlay vs the usual suspects."""
from proxima import costs, flat, tree
from proxima.simnet import Behavior, SimConfig, spawn_world

N = 1000
ROUNDS = 10

cfg = SimConfig(n_validators=N, byz_fraction=0.3, p_miss=0.37, seed=0,
                counting_only=True, behaviors=(Behavior.FABRICATE,))
world = spawn_world(cfg)

f = flat.run_many(world, ROUNDS)
t = tree.run_tree_many(world, ROUNDS)

print("messages per finalized block, N=%d (30%% byzantine, mean of %d rounds)"
      % (N, ROUNDS))
print("  all-to-all votes (quadratic) : %12d" % costs.pbft_messages(N))
print("  leader-based votes (linear)  : %12d" % costs.hotstuff_messages(N))
print("  flat distance filter         : %12.0f" % f.mean_messages)
print("  tree overlay                 : %12.0f" % t.mean_messages)
print()
print("tree runs on %.1fx fewer messages than the leader-based baseline"
      % (costs.hotstuff_messages(N) / t.mean_messages))
print("both filtered protocols finalized every round: flat %.0f%%, tree %.0f%%"
      % (100 * f.success_rate, 100 * t.success_rate))

# where the tree's traffic actually lives
print("\ntree breakdown by layer (level 0 = leaf groups):")
for level, (msgs, _bytes) in sorted(t.metrics.by_level().items()):
    print("  level %d: %7.0f msgs/round" % (level, msgs / ROUNDS))
