#include <map>
#include <stdexcept>
#include <string>

#include "biodiff/eval.hpp"
#include "biodiff/rng.hpp"

namespace biodiff {

Dataset augment_balance(const Dataset& train_set, const Checkpoint& ckpt, int target_per_class,
                        unsigned long long seed, const GuidanceConfig& guidance) {
    if (train_set.empty())
        throw std::invalid_argument("augment_balance: training set is empty");
    if (ckpt.regime != TrainRegime::label)
        throw std::invalid_argument("augment_balance: checkpoint was trained in regime '" +
                                    to_string(ckpt.regime) + "', need label");
    std::map<int, int> counts;
    for (const Signal& s : train_set.signals) {
        if (!s.label) throw std::invalid_argument("augment_balance: unlabeled signal in training set");
        ++counts[*s.label];
    }
    int largest = 0;
    for (const auto& [cls, cnt] : counts) largest = std::max(largest, cnt);
    if (target_per_class < largest)
        throw std::invalid_argument("augment_balance: target_per_class " +
                                    std::to_string(target_per_class) +
                                    " is below the largest class count " + std::to_string(largest));

    Dataset out = train_set;
    for (const auto& [cls, cnt] : counts) {
        const int need = target_per_class - cnt;
        if (need <= 0) continue;
        Dataset gen = sample_label_conditional(ckpt, cls, need, guidance,
                                               derive_seed(seed, "augment", (uint64_t)cls));
        for (Signal& s : gen.signals) out.signals.push_back(std::move(s));
    }
    return out;
}

}  // namespace biodiff
