#include "iie/train/metrics.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "iie/util/errors.h"

namespace iie {

void MetricsLog::merge(const MetricsLog& other, int64_t step_offset) {
    for (MetricsRow row : other.rows_) {
        row.step += step_offset;
        rows_.push_back(std::move(row));
    }
}

bool MetricsLog::any_components() const {
    for (const auto& r : rows_)
        if (r.has_components) return true;
    return false;
}

std::string MetricsLog::to_csv() const {
    const bool comp = any_components();
    std::string out = comp ? "step,split,loss,ppl,lr,grad_norm,loss_ce,loss_mse,loss_kl\n"
                           : "step,split,loss,ppl,lr,grad_norm\n";
    char buf[256];
    for (const auto& r : rows_) {
        std::snprintf(buf, sizeof(buf), "%lld,%s,%.10g,%.10g,%.10g,%.10g",
                      static_cast<long long>(r.step), r.split.c_str(), r.loss, r.ppl, r.lr,
                      r.grad_norm);
        out += buf;
        if (comp) {
            std::snprintf(buf, sizeof(buf), ",%.10g,%.10g,%.10g", r.loss_ce, r.loss_mse, r.loss_kl);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void MetricsLog::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write metrics csv '" + path + "'");
    f << to_csv();
}

double MetricsLog::last_val_loss() const {
    for (auto it = rows_.rbegin(); it != rows_.rend(); ++it)
        if (it->split == "val") return it->loss;
    return std::numeric_limits<double>::quiet_NaN();
}

uint64_t fnv1a64(const void* data, size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace iie
