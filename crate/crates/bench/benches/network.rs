use criterion::{criterion_group, criterion_main, Criterion};
use hgrn_bench::{ctc_small, network_and_batch, surviving_small};
use hgrn_core::Tape;

fn forward_backward(c: &mut Criterion) {
    for (name, env) in [("surviving_small", surviving_small()), ("ctc_small", ctc_small())] {
        let (net, mut store, batch) = network_and_batch(&env);
        let h0 = net.zero_hidden(batch.len());
        c.bench_function(&format!("forward/{name}"), |b| {
            b.iter(|| net.forward_batch(&store, &batch, &h0, false).expect("forward"))
        });
        c.bench_function(&format!("forward_backward/{name}"), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let h = tape.constant(h0.clone());
                let out = net.step(&mut tape, &store, &batch, h).expect("step");
                let loss = tape.sum_all(out.output);
                store.zero_grads();
                tape.backward(loss, &mut store).expect("backward");
            })
        });
    }
}

criterion_group!(benches, forward_backward);
criterion_main!(benches);
