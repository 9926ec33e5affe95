#include "stylediff/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stylediff/diffae.hpp"
#include "stylediff/errors.hpp"

namespace stylediff {

Tensor stochastic_reconstruct(const BaseModel& base, const Tensor& image, uint64_t seed,
                              int decode_steps) {
    Tensor z = base.encoder.encode(image);
    Rng rng(seed);
    Tensor x_T = rng.normal_tensor(image.shape());
    return diffae_decode(base.eps_a, {x_T, base.sched.T}, z, decode_steps, base.sched);
}

std::vector<DensityRecord> density_rank(const BaseModel& base, const EmbeddingBackend& backend,
                                        const std::vector<std::pair<std::string, Tensor>>& corpus,
                                        int k, uint64_t seed, int decode_steps, int recon_avg) {
    if (k < 1) throw_param("density_rank: k must be >= 1");
    if (static_cast<int>(corpus.size()) < 2 * k)
        throw_param("density_rank: corpus must hold at least 2k images");
    if (recon_avg < 1) throw_param("density_rank: recon_avg must be >= 1");

    Rng master(seed);
    std::vector<DensityRecord> records(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
        double score = 0.0;
        for (int m = 0; m < recon_avg; ++m) {
            uint64_t s = master.fork(i * 1000 + static_cast<uint64_t>(m)).next_u64();
            Tensor recon = stochastic_reconstruct(base, corpus[i].second, s, decode_steps);
            score += backend.perceptual_distance(corpus[i].second, recon);
        }
        records[i].image_id = corpus[i].first;
        records[i].perceptual_score = score / recon_avg;
    }

    std::vector<size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (records[a].perceptual_score != records[b].perceptual_score)
            return records[a].perceptual_score > records[b].perceptual_score;
        return records[a].image_id < records[b].image_id;
    });

    std::vector<DensityRecord> ranked;
    ranked.reserve(records.size());
    for (size_t pos = 0; pos < order.size(); ++pos) {
        DensityRecord r = records[order[pos]];
        r.rank = static_cast<int>(pos) + 1;
        if (pos < static_cast<size_t>(k))
            r.bucket = DensityBucket::low_density;
        else if (pos >= order.size() - static_cast<size_t>(k))
            r.bucket = DensityBucket::high_density;
        else
            r.bucket = DensityBucket::middle;
        ranked.push_back(std::move(r));
    }
    return ranked;
}

namespace {

// 4x4 grid of pooled second-layer feature vectors.
std::vector<std::vector<double>> patch_features(const EmbeddingBackend& backend, const Tensor& img) {
    NoGradGuard ng;
    auto feats = backend.image_features(constant(img));
    if (feats.size() < 2) throw_contract("structure proxy: backend exposes too few layers");
    const Tensor& f = feats[1]->value;
    int c = f.dim(0), h = f.dim(1), w = f.dim(2);
    const int grid = 4;
    if (h < grid || w < grid) throw_contract("structure proxy: feature map smaller than grid");
    std::vector<std::vector<double>> patches(grid * grid, std::vector<double>(static_cast<size_t>(c), 0.0));
    const double* d = f.data();
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx) {
            int y0 = gy * h / grid, y1 = (gy + 1) * h / grid;
            int x0 = gx * w / grid, x1 = (gx + 1) * w / grid;
            auto& v = patches[static_cast<size_t>(gy * grid + gx)];
            int count = (y1 - y0) * (x1 - x0);
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) acc += d[(static_cast<int64_t>(ch) * h + y) * w + x];
                v[static_cast<size_t>(ch)] = acc / count;
            }
        }
    return patches;
}

std::vector<double> self_similarity(const std::vector<std::vector<double>>& patches) {
    size_t n = patches.size();
    std::vector<double> s(n * n, 0.0);
    std::vector<double> norms(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (double v : patches[i]) acc += v * v;
        norms[i] = std::sqrt(acc + 1e-12);
    }
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (size_t d = 0; d < patches[i].size(); ++d) acc += patches[i][d] * patches[j][d];
            s[i * n + j] = acc / (norms[i] * norms[j]);
        }
    return s;
}

double cosine_of(const Tensor& a, const Tensor& b) {
    NoGradGuard ng;
    return cosine_similarity(constant(a), constant(b))->value.item();
}

}  // namespace

double structure_distance_proxy(const EmbeddingBackend& backend, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw_contract("structure_distance_proxy: shape mismatch");
    auto sa = self_similarity(patch_features(backend, a));
    auto sb = self_similarity(patch_features(backend, b));
    double acc = 0.0;
    for (size_t i = 0; i < sa.size(); ++i) acc += std::abs(sa[i] - sb[i]);
    return acc / static_cast<double>(sa.size());
}

double id_similarity_proxy(const EmbeddingBackend& backend, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw_contract("id_similarity_proxy: shape mismatch");
    return cosine_of(backend.embed_image(a), backend.embed_image(b));
}

std::vector<SpnAblationRow> run_spn_ablation(
    const std::vector<std::pair<double, const FinetunedModel*>>& entries,
    const std::vector<Tensor>& inputs, const EmbeddingBackend& backend, StylizeOptions base_opts) {
    if (entries.empty()) throw_param("run_spn_ablation: no lambda entries");
    if (inputs.size() < 20) throw_param("run_spn_ablation: need at least 20 inputs");
    std::vector<SpnAblationRow> rows;
    for (const auto& [lambda, model] : entries) {
        StylizeOptions opts = base_opts;
        opts.lambda_spn = lambda;
        SpnAblationRow row;
        row.lambda_spn = lambda;
        for (const Tensor& input : inputs) {
            Tensor out = stylize(*model, input, opts);
            row.mean_structure_distance += structure_distance_proxy(backend, input, out);
            row.mean_id_similarity += id_similarity_proxy(backend, input, out);
        }
        row.mean_structure_distance /= static_cast<double>(inputs.size());
        row.mean_id_similarity /= static_cast<double>(inputs.size());
        rows.push_back(row);
    }
    return rows;
}

std::string density_report_tsv(const std::vector<DensityRecord>& records) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "image_id\tscore\trank\tbucket\n";
    for (const auto& r : records) {
        const char* bucket = r.bucket == DensityBucket::low_density    ? "low_density"
                             : r.bucket == DensityBucket::high_density ? "high_density"
                                                                       : "middle";
        ss << r.image_id << '\t' << r.perceptual_score << '\t' << r.rank << '\t' << bucket << '\n';
    }
    return ss.str();
}

std::string ablation_report_tsv(const std::vector<SpnAblationRow>& rows) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "lambda_spn\tmean_structure_distance\tmean_id_similarity\n";
    for (const auto& r : rows)
        ss << r.lambda_spn << '\t' << r.mean_structure_distance << '\t' << r.mean_id_similarity
           << '\n';
    return ss.str();
}

}  // namespace stylediff
