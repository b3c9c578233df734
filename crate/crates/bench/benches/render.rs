use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use vibroaffect::synth::{encode_wav, render};
use vibroaffect::{lexicon_estimate, map_affect, parse_affect_response, AffectScore, EnvelopeSpec, SampleRate};

// 50 characters, mixed kana and kanji
const PHRASE: &str = "今日はとても楽しい一日でした。みんなと一緒にご飯を食べて、たくさん笑いました。また明日も会えるかな。";

fn map_and_render(c: &mut Criterion) {
    let affect = AffectScore::from_poles(72.5, 61.0).unwrap();
    let mut group = c.benchmark_group("map+render");
    for rate in [SampleRate::Hz44100, SampleRate::Hz48000] {
        group.bench_with_input(BenchmarkId::from_parameter(rate.hz()), &rate, |b, rate| {
            b.iter(|| {
                let params = map_affect(black_box(&affect), black_box(PHRASE)).unwrap();
                render(&params, *rate, &EnvelopeSpec::default()).unwrap()
            })
        });
    }
    group.finish();
}

fn encode(c: &mut Criterion) {
    let params = map_affect(&AffectScore::neutral(), PHRASE).unwrap();
    let buf = render(&params, SampleRate::Hz44100, &EnvelopeSpec::default()).unwrap();
    c.bench_function("encode_wav", |b| b.iter(|| encode_wav(black_box(&buf))));
}

fn parse(c: &mut Criterion) {
    let reply = "Sure! Pleasure: 70.0%, Misery: 29.8%, Arousal: 40.0%, Sleepiness: 60.0%";
    c.bench_function("parse_affect_response", |b| b.iter(|| parse_affect_response(black_box(reply))));
}

fn lexicon(c: &mut Criterion) {
    let mut group = c.benchmark_group("lexicon_estimate");
    group.bench_function("ja", |b| b.iter(|| lexicon_estimate(black_box(PHRASE))));
    group.bench_function("en", |b| {
        b.iter(|| lexicon_estimate(black_box("I feel like I'm under a lot of stress.")))
    });
    group.finish();
}

criterion_group!(benches, map_and_render, encode, parse, lexicon);
criterion_main!(benches);
