use criterion::{criterion_group, criterion_main, Criterion};
use ementa::model::{backward, build_model, forward_logits, EncoderConfig, Example};

fn example(len: usize, vocab: usize, labels: usize) -> Example {
    Example {
        tokens: (0..len).map(|i| ((i * 7 + 3) % vocab) as u32).collect(),
        targets: (0..labels).map(|l| f64::from(u8::from(l % 3 == 0))).collect(),
    }
}

fn encoder(c: &mut Criterion) {
    let mut cfg = EncoderConfig::new(2000, 64);
    cfg.ff_dim = 256;
    let params = build_model(&cfg, 20, 1).unwrap();
    let ex = example(131, 2000, 20);
    c.bench_function("forward/d64/len131", |b| b.iter(|| forward_logits(&params, &ex.tokens, 131).unwrap()));
    let batch = [ex];
    c.bench_function("backward/d64/len131", |b| b.iter(|| backward(&params, &batch, 131).unwrap()));
}

criterion_group!(benches, encoder);
criterion_main!(benches);
