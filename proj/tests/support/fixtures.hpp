#pragma once

// Small trained models shared across test cases. Built once per binary;
// every quantity is seeded, so the fixture is identical on every run.

#include "bdf/data.hpp"
#include "bdf/model.hpp"
#include "bdf/train.hpp"

namespace fixtures {

struct Desk {
    bdf::Dataset train_clean;
    bdf::Dataset test;
    bdf::TriggerSpec original;       // 3x3 white square, margin 1, target 2
    bdf::ModelParams vanilla;
    bdf::ModelParams backdoored;

    static constexpr int kClasses = 5;
    static constexpr int kSize = 16;
    static constexpr int kTarget = 2;
};

inline const Desk& desk() {
    static const Desk fixture = [] {
        Desk d;
        d.train_clean = bdf::gen_synthetic(Desk::kClasses, 120, Desk::kSize, Desk::kSize, 101);
        d.test = bdf::gen_synthetic(Desk::kClasses, 40, Desk::kSize, Desk::kSize, 102);
        d.original = bdf::make_original_trigger(Desk::kSize, Desk::kSize, 3, 1, Desk::kTarget);

        bdf::PoisonConfig pc;
        pc.trigger = d.original;
        pc.poison_rate = 0.1f;
        pc.rng_seed = 103;
        const bdf::PoisonResult poisoned = bdf::poison(d.train_clean, pc);

        const bdf::ModelParams init =
            bdf::ModelParams::init(Desk::kClasses, 1, Desk::kSize, Desk::kSize, 104);
        bdf::TrainConfig tc;
        tc.epochs = 5;
        tc.batch_size = 32;
        tc.rng_seed = 105;
        d.vanilla = bdf::train(init, d.train_clean, tc).params;
        d.backdoored = bdf::train(init, poisoned.dataset, tc).params;
        return d;
    }();
    return fixture;
}

}  // namespace fixtures
