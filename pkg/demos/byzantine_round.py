"""One consensus round with every misbehavior in the book, narrated.

Twelve validators, three of them hostile in three different ways. Watch who
gets filtered by distance, who gets healed, and who still can't stop the
certificate.
"""
from proxima import flat
from proxima.simnet import SimConfig, spawn_world


def name(world, i):
    b = world.validators[i].behavior
    return b.value if b else "honest"


def main():
    cfg = SimConfig(n_validators=12, byz_fraction=0.25, p_miss=0.4, seed=21)
    world = spawn_world(cfg)
    print("validators:", {i: name(world, i) for i in range(12)
                          if world.validators[i].byzantine})
    print("quorum needed: %d of %d\n" % (cfg.quorum, cfg.n_validators))

    res = flat.run_round(world, 0)
    setup = res.setup

    for i in range(12):
        d = res.cluster.pre_push_distances[i]
        mark = "in " if res.cluster.included[i] else "OUT"
        missing = setup.detected_missing(i)
        extra = ""
        if missing and not world.validators[i].byzantine:
            extra = "  <- straggler, %d tx pushed" % len(missing)
        print("  [%2d] %-22s d=%6.2f  %s%s" % (i, name(world, i), d, mark, extra))

    print("\ncommits matching the block: %d" % res.commits_valid)
    if res.success:
        cert = res.finalized.certificate
        print("finalized. certificate signers: %s" % (res.finalized.signers,))
        print("aggregate verifies: %s" % world.registry.verify_aggregate(cert))
    else:
        print("no certificate this round (liveness, not safety -- retry)")
    print("conflicting quorums observed: %d" % len(res.conflicting))
    print("messages this round: %d (%d bytes)"
          % (res.metrics.messages, res.metrics.bytes))


if __name__ == "__main__":
    main()
