use captionlab::formats;
use captionlab::retriever::*;
use captionlab::synthworld::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tok(a: Attribute, v: u8) -> Token {
    attribute_token(a, v).unwrap()
}

/// Sum of rows in the given order, then divide by the Euclidean norm.
fn sum_normalize(rows: &[&[f64]]) -> Vec<f64> {
    let mut s = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, b) in s.iter_mut().zip(r.iter()) {
            *a += b;
        }
    }
    let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    s.into_iter().map(|x| x / n).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Rank of `target` in row `q` by sorting the whole gallery.
fn brute_force_recall(sims: &[Vec<f64>], pairing: &[usize], k: usize) -> f64 {
    let hits = sims
        .iter()
        .zip(pairing)
        .filter(|(row, &t)| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            order.iter().position(|&g| g == t).unwrap() < k
        })
        .count();
    hits as f64 / sims.len() as f64
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> EmbeddingVector {
    EmbeddingVector::normalized((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn single_word_caption_is_its_normalized_row() {
    let p = build_retriever(4, 64, 0.1).unwrap();
    let red = tok(Attribute::Color, 0);
    let e = embed_tokens(&[BOS, red, EOS], &p).unwrap();
    assert!(close(e.as_slice(), &sum_normalize(&[p.text_row(red)]), 1e-12));
    assert_eq!(embed_tokens(&[BOS, red, red, EOS], &p).unwrap(), e);
}

#[test]
fn four_token_caption_matches_oracle() {
    let p = build_retriever(21, 64, 0.1).unwrap();
    let words = [THERE, tok(Attribute::Size, 3), tok(Attribute::Color, 2), tok(Attribute::Object, 5)];
    let caption = [BOS, words[0], words[1], words[2], words[3], EOS];
    let rows: Vec<&[f64]> = words.iter().map(|w| p.text_row(*w)).collect();
    let e = embed_tokens(&caption, &p).unwrap();
    assert!(close(e.as_slice(), &sum_normalize(&rows), 1e-12));
    assert!((e.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-6);
}

#[test]
fn scene_embedding_matches_oracle() {
    let p = build_retriever(21, 64, 0.1).unwrap();
    let scene = Scene::new(0, [3, 1, 4, 1, 5, 6]);
    let rows: Vec<&[f64]> = Attribute::ALL.iter().map(|a| p.image_row(*a, scene.value(*a))).collect();
    let e = embed_image(&scene, &p).unwrap();
    assert!(close(e.as_slice(), &sum_normalize(&rows), 1e-12));
    assert_eq!(embed_image(&Scene::new(9, scene.attributes), &p).unwrap(), e);
}

#[test]
fn exact_alignment_makes_the_described_scene_strictly_best() {
    let p = build_retriever(2, 64, 0.0).unwrap();
    let world = generate_world(2, 200, 0, &SalienceProfile([1.0; NUM_ATTRIBUTES])).unwrap();
    for (s, c) in world.scenes.iter().zip(&world.gt_captions).take(40) {
        let t = embed_text(c, &p).unwrap();
        let own = similarity(&t, &embed_image(s, &p).unwrap()).unwrap();
        for other in world.scenes.iter().filter(|o| o.attributes != s.attributes) {
            let sim = similarity(&t, &embed_image(other, &p).unwrap()).unwrap();
            assert!(own > sim, "scene {} vs {}", s.id, other.id);
        }
    }
}

#[test]
fn disjoint_rows_have_zero_similarity_without_noise() {
    let p = build_retriever(2, 64, 0.0).unwrap();
    let scene = Scene::new(0, [0; NUM_ATTRIBUTES]);
    // every attribute word of the caption names a value the scene does not have
    let caption = [BOS, THERE, IS, A, tok(Attribute::Color, 3), tok(Attribute::Object, 4), EOS];
    let s = similarity(&embed_tokens(&caption, &p).unwrap(), &embed_image(&scene, &p).unwrap()).unwrap();
    assert!(s.abs() < 1e-12, "{s}");
}

#[test]
fn build_is_deterministic() {
    let a = build_retriever(5, 64, 0.1).unwrap();
    assert_eq!(a, build_retriever(5, 64, 0.1).unwrap());
    assert_eq!(a.hash(), build_retriever(5, 64, 0.1).unwrap().hash());
    assert_ne!(a.hash(), build_retriever(6, 64, 0.1).unwrap().hash());
    assert!(a.frozen());
}

#[test]
fn similarity_bounds_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = random_unit(&mut rng, 64);
    assert!((similarity(&v, &v).unwrap() - 1.0).abs() < 1e-6);
    assert!((similarity(&v, &-&v).unwrap() + 1.0).abs() < 1e-6);
    let w = random_unit(&mut rng, 64);
    let oracle: f64 = v.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
    assert!((similarity(&v, &w).unwrap() - oracle).abs() < 1e-15);
    assert_eq!(similarity(&v, &w).unwrap(), similarity(&w, &v).unwrap());
    assert!(similarity(&v, &random_unit(&mut rng, 8)).is_err());
}

#[test]
fn own_caption_margin_on_a_64_scene_world() {
    let p = build_retriever(7 ^ 0x9e37_79b9_7f4a_7c15, DEFAULT_DIM, DEFAULT_NOISE).unwrap();
    let w = generate_world(7, 64, 0, &SalienceProfile::uniform_optional(0.2)).unwrap();
    let texts: Vec<_> = w.gt_captions.iter().map(|c| embed_text(c, &p).unwrap()).collect();
    let images: Vec<_> = w.scenes.iter().map(|s| embed_image(s, &p).unwrap()).collect();
    let m = similarity_matrix(&texts, &images).unwrap();
    let n = m.len();
    let own: f64 = (0..n).map(|i| m[i][i]).sum::<f64>() / n as f64;
    let cross: f64 = (0..n).flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j]).sum::<f64>()
        / (n * (n - 1)) as f64;
    let margin = own - cross;
    assert!(margin > 0.0);
    assert!((margin - OWN_CAPTION_MARGIN).abs() < 1e-9, "{margin}");
}

// Exhaustive 64×64 similarity sweep, seed 7, uniform optional salience 0.2.
const OWN_CAPTION_MARGIN: f64 = 0.391_524_361_373_772_67;

#[test]
fn recall_identity_gallery_is_perfect() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let items: Vec<_> = (0..20).map(|_| random_unit(&mut rng, 16)).collect();
    let pairing: Vec<usize> = (0..20).collect();
    assert_eq!(recall_at_k(&items, &items, &pairing, 1).unwrap(), 1.0);
}

#[test]
fn recall_least_similar_pairing_is_zero() {
    // row i prefers gallery i most and gallery (i + 1) mod n least
    let n = 6;
    let sims: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if j == (i + 1) % n { -1.0 } else { 1.0 - ((j + n - i) % n) as f64 * 0.1 }).collect())
        .collect();
    let pairing: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    for (row, &t) in sims.iter().zip(&pairing) {
        assert!(row.iter().all(|v| *v >= row[t]));
    }
    assert_eq!(recall_at_k_from_matrix(&sims, &pairing, 1).unwrap(), 0.0);
}

#[test]
fn recall_on_seeded_8x8_matches_exhaustive_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let q: Vec<_> = (0..8).map(|_| random_unit(&mut rng, 5)).collect();
    let g: Vec<_> = (0..8).map(|_| random_unit(&mut rng, 5)).collect();
    let pairing = [3, 0, 7, 1, 6, 2, 5, 4];
    let sims = similarity_matrix(&q, &g).unwrap();
    for k in 1..=8 {
        assert_eq!(recall_at_k(&q, &g, &pairing, k).unwrap(), brute_force_recall(&sims, &pairing, k));
    }
}

#[test]
fn recall_ties_rank_the_lower_index_first() {
    let sims = vec![vec![0.5, 0.5, 0.1], vec![0.5, 0.5, 0.1]];
    assert_eq!(recall_at_k_from_matrix(&sims, &[0, 1], 1).unwrap(), 0.5);
}

#[test]
fn recall_argument_errors() {
    let sims = vec![vec![0.5, 0.1], vec![0.2, 0.3]];
    assert!(recall_at_k_from_matrix(&sims, &[0, 1], 3).is_err());
    assert!(recall_at_k_from_matrix(&sims, &[0, 1], 0).is_err());
    assert!(recall_at_k_from_matrix(&sims, &[0, 0], 1).is_err());
    assert!(recall_at_k_from_matrix(&sims, &[0], 1).is_err());
}

#[test]
fn retriever_file_round_trips_bit_exactly() {
    let p = build_retriever(12, 64, 0.1).unwrap();
    let back = formats::retriever_from_str(&formats::retriever_to_string(&p).unwrap()).unwrap();
    assert_eq!(back.hash(), p.hash());
    assert_eq!(back, p);
}

fn caption_strategy() -> impl Strategy<Value = Vec<Token>> {
    prop::collection::vec(THERE..VOCAB_SIZE as Token, 1..10)
}

proptest! {
    #[test]
    fn embedding_ignores_order(words in caption_strategy(), seed in 0u64..50) {
        let p = build_retriever(seed, 32, 0.1).unwrap();
        let mut rev = words.clone();
        rev.reverse();
        let mut framed = vec![BOS];
        framed.extend(&words);
        framed.push(EOS);
        prop_assert_eq!(embed_tokens(&framed, &p).unwrap(), embed_tokens(&rev, &p).unwrap());
    }

    #[test]
    fn embedding_ignores_uniform_repetition(words in caption_strategy(), times in 2usize..4) {
        let p = build_retriever(1, 64, 0.1).unwrap();
        let repeated: Vec<Token> = words.iter().flat_map(|w| std::iter::repeat_n(*w, times)).collect();
        let a = embed_tokens(&words, &p).unwrap();
        let b = embed_tokens(&repeated, &p).unwrap();
        prop_assert!(close(a.as_slice(), b.as_slice(), 1e-12));
    }

    #[test]
    fn embeddings_are_unit_norm(words in caption_strategy(), attrs in prop::array::uniform6(0u8..8)) {
        let p = build_retriever(2, 64, 0.1).unwrap();
        let t = embed_tokens(&words, &p).unwrap();
        let i = embed_image(&Scene::new(0, attrs), &p).unwrap();
        for e in [t, i] {
            let n = e.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn recall_is_monotone_in_k(seed in 0u64..500, n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<_> = (0..n).map(|_| random_unit(&mut rng, 4)).collect();
        let g: Vec<_> = (0..n).map(|_| random_unit(&mut rng, 4)).collect();
        let mut pairing: Vec<usize> = (0..n).collect();
        pairing.rotate_left(seed as usize % n);
        let mut last = 0.0;
        for k in 1..=n {
            let r = recall_at_k(&q, &g, &pairing, k).unwrap();
            prop_assert!(r >= last);
            prop_assert_eq!(r, brute_force_recall(&similarity_matrix(&q, &g).unwrap(), &pairing, k));
            last = r;
        }
        prop_assert_eq!(last, 1.0);
    }
}
