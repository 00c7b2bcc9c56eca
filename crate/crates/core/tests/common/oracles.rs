use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use packet2vec::classify::GaussianNbModel;
use packet2vec::embedding::{nce_loss_and_grad, Batch};
use packet2vec::eval::{pr_curve, roc_curve};
use packet2vec::featurize::{featurize_capture, featurize_packet_f64};
use packet2vec::groundtruth::{label_capture, PortMatch};
use packet2vec::translate::translate_capture;
use packet2vec::vocab::{build_vocabulary, count_ngrams};
use packet2vec::{
    AttackRecord, CaptureFile, EmbeddingMatrix, FeatureMatrix, LabelVector, ScoreVector,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ensure, random_ipv4_capture, random_raw_capture, run_cases, Check};

fn random_corpus(r: &mut ChaCha8Rng) -> Vec<CaptureFile> {
    (0..r.random_range(1..4))
        .map(|_| {
            if r.random_bool(0.5) {
                {
                    let k = r.random_range(0..20);
                    random_raw_capture(r, k, 40)
                }
            } else {
                {
                    let k = r.random_range(0..10);
                    random_ipv4_capture(r, k, 30)
                }
            }
        })
        .collect()
}

fn naive_counts(corpus: &[CaptureFile], n: usize) -> BTreeMap<Vec<u8>, u64> {
    let mut counts = BTreeMap::new();
    for c in corpus {
        for p in &c.packets {
            if p.content.len() < n {
                continue;
            }
            for i in 0..=p.content.len() - n {
                *counts.entry(p.content[i..i + n].to_vec()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Top-K by count, ties by ascending bytes, against a full sort.
pub fn vocabulary_top_k(instances: usize, seed: u64) -> Check {
    run_cases(instances, seed, |r| {
        let corpus = random_corpus(r);
        let n = r.random_range(1..=4);
        let k = r.random_range(1..60);
        let vocab = build_vocabulary(&count_ngrams(&corpus, n), k).map_err(|e| e.to_string())?;
        let mut all: Vec<(Vec<u8>, u64)> = naive_counts(&corpus, n).into_iter().collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        all.truncate(k);
        let got: Vec<(Vec<u8>, u64)> = vocab
            .entries()
            .map(|(g, _, c)| (g.as_bytes().to_vec(), c))
            .collect();
        ensure(got == all, || format!("n={n} k={k}: {got:?} != {all:?}"))?;
        for (rank, (g, _)) in all.iter().enumerate() {
            let id = vocab.id(&packet2vec::NGram::new(g));
            ensure(id as usize == rank + 1, || {
                format!("{g:?} has id {id}, rank {rank}")
            })?;
        }
        Ok(())
    })
}

/// Per-packet translation against a window-by-window map lookup.
pub fn translation_naive_map(instances: usize, seed: u64) -> Check {
    run_cases(instances, seed, |r| {
        let corpus = random_corpus(r);
        let n = r.random_range(1..=3);
        let vocab = build_vocabulary(&count_ngrams(&corpus, n), r.random_range(1..30))
            .map_err(|e| e.to_string())?;
        let map: BTreeMap<Vec<u8>, u32> = vocab
            .entries()
            .map(|(g, id, _)| (g.as_bytes().to_vec(), id))
            .collect();
        for cap in &corpus {
            let t = translate_capture(cap, &vocab);
            let mut flat = Vec::new();
            ensure(t.packet_count() == cap.len(), || {
                "packet count differs".into()
            })?;
            for (p, got) in cap.packets.iter().zip(t.per_packet()) {
                let want: Vec<u32> = if p.content.len() < n {
                    Vec::new()
                } else {
                    (0..=p.content.len() - n)
                        .map(|i| map.get(&p.content[i..i + n]).copied().unwrap_or(0))
                        .collect()
                };
                ensure(got == want.as_slice(), || format!("{got:?} != {want:?}"))?;
                flat.extend(want);
            }
            ensure(t.flat() == flat.as_slice(), || {
                "flat stream is not the concatenation".into()
            })?;
        }
        Ok(())
    })
}

/// Mean embedding against sum-then-divide, within 1e-12.
pub fn featurization_sum_divide(instances: usize, seed: u64) -> Check {
    run_cases(instances, seed, |r| {
        let rows = r.random_range(2..50);
        let dim = r.random_range(1..20);
        let e = EmbeddingMatrix::random(rows, dim, r);
        let packets: Vec<Vec<u32>> = (0..r.random_range(0..8))
            .map(|_| {
                (0..r.random_range(0..40))
                    .map(|_| r.random_range(0..rows as u32))
                    .collect()
            })
            .collect();
        for p in &packets {
            let got = featurize_packet_f64(p, &e);
            let mut sum = vec![0.0f64; dim];
            for id in p {
                for (j, s) in sum.iter_mut().enumerate() {
                    *s += f64::from(e.row(*id)[j]);
                }
            }
            for (j, g) in got.iter().enumerate() {
                let want = if p.is_empty() {
                    0.0
                } else {
                    sum[j] / p.len() as f64
                };
                ensure((g - want).abs() <= 1e-12, || {
                    format!("dim {j}: {g} vs {want}")
                })?;
            }
        }
        let t = packet2vec::TokenizedCapture::from_packets("f", packets.clone());
        let x = featurize_capture(&t, &e).map_err(|e| e.to_string())?;
        for (i, p) in packets.iter().enumerate() {
            let want: Vec<f32> = featurize_packet_f64(p, &e)
                .iter()
                .map(|v| *v as f32)
                .collect();
            ensure(x.row(i) == want.as_slice(), || {
                format!("matrix row {i} differs")
            })?;
        }
        Ok(())
    })
}

fn random_scores(r: &mut ChaCha8Rng, len: usize) -> (ScoreVector, LabelVector) {
    // Coarse quantization forces ties.
    let levels = r.random_range(1..20) as f64;
    let mut labels: Vec<u8> = (0..len).map(|_| u8::from(r.random_bool(0.3))).collect();
    labels[0] = 1;
    labels[1] = 0;
    let scores = labels
        .iter()
        .map(|l| {
            let base: f64 = r.random();
            let shifted = (base + 0.3 * f64::from(*l)).min(1.0);
            (shifted * levels).round() / levels
        })
        .collect();
    (
        ScoreVector::new(scores),
        LabelVector::new("s", labels).unwrap(),
    )
}

/// AUC-ROC against the Mann-Whitney pairwise statistic, ties counted half.
pub fn auc_mann_whitney(instances: usize, seed: u64) -> Check {
    run_cases(instances, seed, |r| {
        let len = r.random_range(2..120);
        let (s, l) = random_scores(r, len);
        let (_, auc) = roc_curve(&s, &l).map_err(|e| e.to_string())?;
        let (mut wins, mut pairs) = (0.0f64, 0.0f64);
        for (sp, lp) in s.scores().iter().zip(l.labels()) {
            for (sn, ln) in s.scores().iter().zip(l.labels()) {
                if *lp == 1 && *ln == 0 {
                    pairs += 1.0;
                    if sp > sn {
                        wins += 1.0;
                    } else if sp == sn {
                        wins += 0.5;
                    }
                }
            }
        }
        let want = wins / pairs;
        ensure((auc - want).abs() <= 1e-9, || {
            format!("auc {auc} vs pairwise {want}")
        })
    })
}

/// Every PR point against a confusion matrix counted at its threshold.
pub fn pr_brute_force(instances: usize, seed: u64) -> Check {
    run_cases(instances, seed, |r| {
        let len = r.random_range(2..120);
        let (s, l) = random_scores(r, len);
        let (pts, auc) = pr_curve(&s, &l).map_err(|e| e.to_string())?;
        ensure(pts[0].recall == 0.0 && pts[0].precision == 1.0, || {
            "missing (0, 1) endpoint".into()
        })?;
        let unique: BTreeSet<u64> = s.scores().iter().map(|v| v.to_bits()).collect();
        ensure(pts.len() <= unique.len() + 2, || "too many points".into())?;
        ensure((0.0..=1.0).contains(&auc), || format!("auc_pr {auc}"))?;
        for w in pts.windows(2) {
            ensure(w[1].threshold < w[0].threshold, || {
                "thresholds not descending".into()
            })?;
        }
        for p in &pts[1..] {
            let (mut tp, mut fp, mut pos) = (0u32, 0u32, 0u32);
            for (score, label) in s.scores().iter().zip(l.labels()) {
                pos += u32::from(*label);
                if *score >= p.threshold {
                    if *label == 1 {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            let precision = f64::from(tp) / f64::from(tp + fp);
            let recall = f64::from(tp) / f64::from(pos);
            ensure(
                (p.precision - precision).abs() <= 1e-15 && (p.recall - recall).abs() <= 1e-15,
                || {
                    format!(
                        "at {}: ({}, {}) vs ({recall}, {precision})",
                        p.threshold, p.recall, p.precision
                    )
                },
            )?;
        }
        Ok(())
    })
}

/// File-by-file fitting against one fit over the concatenation, in both
/// file orders: counts and means exact, variances within 1e-9.
pub fn gnb_merge_vs_concat(instances: usize, seed: u64) -> Check {
    run_cases(instances, seed, |r| {
        let d = r.random_range(1..6);
        let files: Vec<(Vec<f32>, Vec<u8>)> = (0..r.random_range(1..6))
            .map(|_| {
                let rows = r.random_range(0..30);
                let offset = r.random_range(-100.0..100.0f32);
                let x = (0..rows * d)
                    .map(|_| offset + r.random_range(-10.0..10.0f32))
                    .collect();
                let y = (0..rows).map(|_| u8::from(r.random_bool(0.4))).collect();
                (x, y)
            })
            .collect();
        let fm = |x: &[f32]| FeatureMatrix::new("g", x.len() / d, d, x.to_vec()).unwrap();
        let fit = |order: &mut dyn Iterator<Item = &(Vec<f32>, Vec<u8>)>| {
            let mut m = GaussianNbModel::new();
            for (x, y) in order {
                m.fit_file(&fm(x), &LabelVector::new("g", y.clone()).unwrap())
                    .unwrap();
            }
            m
        };
        let forward = fit(&mut files.iter());
        let backward = fit(&mut files.iter().rev());
        let all_x: Vec<f32> = files.iter().flat_map(|f| f.0.clone()).collect();
        let all_y: Vec<u8> = files.iter().flat_map(|f| f.1.clone()).collect();
        let mut whole = GaussianNbModel::new();
        whole
            .fit_file(&fm(&all_x), &LabelVector::new("g", all_y).unwrap())
            .unwrap();
        for m in [&forward, &backward] {
            for c in 0..2 {
                let (a, b) = (m.class(c), whole.class(c));
                ensure(a.count() == b.count(), || {
                    format!("class {c} counts differ")
                })?;
                ensure(a.means() == b.means(), || format!("class {c} means differ"))?;
                for j in 0..d.min(a.means().len()) {
                    let (va, vb) = (a.raw_var(j), b.raw_var(j));
                    ensure((va - vb).abs() <= 1e-9, || {
                        format!("class {c} var {j}: {va} vs {vb}")
                    })?;
                }
            }
        }
        Ok(())
    })
}

/// Capture labelling against an exhaustive packet-by-record loop.
pub fn groundtruth_double_loop(instances: usize, seed: u64) -> Check {
    let hosts = [
        Ipv4Addr::new(10, 0, 0, 1),
        Ipv4Addr::new(10, 0, 0, 2),
        Ipv4Addr::new(192, 168, 1, 7),
        Ipv4Addr::new(172, 16, 0, 9),
        Ipv4Addr::new(8, 8, 8, 8),
    ];
    run_cases(instances, seed, |r| {
        let cap = {
            let k = r.random_range(0..40);
            random_ipv4_capture(r, k, 8)
        };
        let records: Vec<AttackRecord> = (0..r.random_range(0..5))
            .map(|_| {
                let a: u64 = r.random_range(100_000_000..110_000_000);
                let b: u64 = r.random_range(100_000_000..110_000_000);
                AttackRecord {
                    start_us: a.min(b),
                    end_us: a.max(b),
                    ip_a: hosts[r.random_range(0..hosts.len())],
                    ip_b: r
                        .random_bool(0.5)
                        .then(|| hosts[r.random_range(0..hosts.len())]),
                    port: if r.random_bool(0.4) {
                        PortMatch::Any
                    } else {
                        PortMatch::Port([22, 80, 443, 5353, 9][r.random_range(0..5)])
                    },
                    category: "x".into(),
                }
            })
            .collect();
        let labels = label_capture(&cap, &records);
        for (i, p) in cap.packets.iter().enumerate() {
            let ts = u64::from(p.ts_sec) * 1_000_000 + u64::from(p.ts_usec);
            let mut want = 0u8;
            for rec in &records {
                let listed: BTreeSet<Ipv4Addr> =
                    std::iter::once(rec.ip_a).chain(rec.ip_b).collect();
                let seen: BTreeSet<Ipv4Addr> = p.src_ip.into_iter().chain(p.dst_ip).collect();
                let time_ok = rec.start_us <= ts && ts <= rec.end_us;
                let ip_ok = !listed.is_disjoint(&seen);
                let port_ok = match rec.port {
                    PortMatch::Any => true,
                    PortMatch::Port(q) => p.src_port == Some(q) || p.dst_port == Some(q),
                };
                if time_ok && ip_ok && port_ok {
                    want = 1;
                }
            }
            ensure(labels.labels()[i] == want, || {
                format!("packet {i}: got {}, want {want}", labels.labels()[i])
            })?;
        }
        Ok(())
    })
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Independent f64 evaluation of the sampled logistic loss.
fn oracle_loss(
    rows: &[f64],
    w: &[f64],
    b: &[f64],
    d: usize,
    batch: &Batch,
    negatives: &[u32],
) -> f64 {
    let dot = |u: usize, v: usize| (0..d).map(|j| rows[u * d + j] * w[v * d + j]).sum::<f64>();
    let mut total = 0.0;
    for (t, c) in batch.targets.iter().zip(&batch.contexts) {
        let (t, c) = (*t as usize, *c as usize);
        total += softplus(-(dot(t, c) + b[c]));
        for k in negatives {
            let k = *k as usize;
            total += softplus(dot(t, k) + b[k]);
        }
    }
    total / batch.targets.len() as f64
}

#[derive(Clone, Copy, Debug)]
enum Coord {
    Row(u32, usize),
    Weight(u32, usize),
    Bias(u32),
}

/// Analytic gradients against central differences of the oracle loss, at
/// `coords` coordinates in each of `configs` random configurations.
/// Relative tolerance 1e-5 with a 1e-8 absolute floor for near-zero entries.
pub fn nce_gradient_check(configs: usize, coords: usize, seed: u64) -> Check {
    run_cases(configs, seed, |r| {
        let vocab_rows = r.random_range(5..40usize);
        let d = r.random_range(1..16usize);
        let mut m = EmbeddingMatrix::zeros(vocab_rows, d);
        for id in 1..vocab_rows as u32 {
            for v in m.row_mut(id) {
                *v = r.random_range(-0.5..0.5);
            }
        }
        for id in 0..vocab_rows as u32 {
            for v in m.weight_mut(id) {
                *v = r.random_range(-0.5..0.5);
            }
            *m.bias_mut(id) = r.random_range(-0.5..0.5);
        }
        let pairs = r.random_range(1..20);
        let id = |r: &mut ChaCha8Rng| r.random_range(0..vocab_rows as u32);
        let batch = Batch {
            targets: (0..pairs).map(|_| id(r)).collect(),
            contexts: (0..pairs).map(|_| id(r)).collect(),
        };
        let negatives: Vec<u32> = (0..r.random_range(1..10)).map(|_| id(r)).collect();
        let (loss, grads) = nce_loss_and_grad(&batch, &negatives, &m).map_err(|e| e.to_string())?;

        let to64 = |xs: &[f32]| xs.iter().map(|v| f64::from(*v)).collect::<Vec<f64>>();
        let (rows, w, b) = (to64(m.rows()), to64(m.nce_weights()), to64(m.nce_biases()));
        let base = oracle_loss(&rows, &w, &b, d, &batch, &negatives);
        ensure((loss - base).abs() <= 1e-12 * base.abs().max(1.0), || {
            format!("loss {loss} vs {base}")
        })?;

        for _ in 0..coords {
            // Mostly touched parameters, sometimes any non-OOV coordinate.
            let touched = r.random_bool(0.8);
            let coord = match r.random_range(0..3) {
                0 if touched && !grads.row_ids().is_empty() => Coord::Row(
                    grads.row_ids()[r.random_range(0..grads.row_ids().len())],
                    r.random_range(0..d),
                ),
                0 => Coord::Row(r.random_range(1..vocab_rows as u32), r.random_range(0..d)),
                1 if touched => Coord::Weight(
                    grads.weight_ids()[r.random_range(0..grads.weight_ids().len())],
                    r.random_range(0..d),
                ),
                1 => Coord::Weight(id(r), r.random_range(0..d)),
                _ if touched => {
                    Coord::Bias(grads.weight_ids()[r.random_range(0..grads.weight_ids().len())])
                }
                _ => Coord::Bias(id(r)),
            };
            let analytic = match coord {
                Coord::Row(i, j) => grads.row(i).map_or(0.0, |g| g[j]),
                Coord::Weight(i, j) => grads.weight(i).map_or(0.0, |g| g[j]),
                Coord::Bias(i) => grads.bias(i).unwrap_or(0.0),
            };
            let h = 1e-5;
            let eval = |delta: f64| {
                let (mut rows, mut w, mut b) = (rows.clone(), w.clone(), b.clone());
                match coord {
                    Coord::Row(i, j) => rows[i as usize * d + j] += delta,
                    Coord::Weight(i, j) => w[i as usize * d + j] += delta,
                    Coord::Bias(i) => b[i as usize] += delta,
                }
                oracle_loss(&rows, &w, &b, d, &batch, &negatives)
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let tol = 1e-5 * analytic.abs().max(numeric.abs()) + 1e-8;
            ensure((analytic - numeric).abs() <= tol, || {
                format!("{coord:?}: analytic {analytic} vs numeric {numeric}")
            })?;
        }
        Ok(())
    })
}
