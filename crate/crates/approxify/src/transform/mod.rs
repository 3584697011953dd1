//! Block enumeration and the four approximation rewrites, as
//! program-to-program transforms.

mod blocks;
mod rewrite;

pub use blocks::{counted_step, enumerate_blocks, is_memoizable, Block, BlockKind};
pub use rewrite::{
    apply_config, apply_memoization, apply_random, apply_sampling, apply_technique,
    apply_truncation, ApproxConfig, ApproxTechnique,
};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransformError {
    #[error("block {block} is not a counted loop; truncation needs a known trip count")]
    NotCounted { block: u32 },
    #[error("block {block} is not memoizable")]
    NotMemoizable { block: u32 },
    #[error("block {block} is not a loop")]
    NotALoop { block: u32 },
    #[error("block {block} is not a function")]
    NotAFunction { block: u32 },
    #[error("no such block id {id}")]
    UnknownBlock { id: u32 },
    #[error("invalid technique parameter: {0}")]
    InvalidParameter(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run_continuous, InputCase, PlatformModel, ProgramOutput};
    use crate::lang::{ast_eq, parse_source, pretty_print, NodePath};

    fn plat() -> PlatformModel {
        PlatformModel::cortex_m()
    }

    fn run_nums(p: &crate::lang::Program, seed: u64) -> Vec<f64> {
        match run_continuous(p, &InputCase::default(), &plat(), 100_000_000, seed)
            .unwrap()
            .0
        {
            ProgramOutput::Numeric(v) => v,
            other => panic!("expected numeric output, got {other:?}"),
        }
    }

    const LOOPY: &str = r#"
func helper(x: float) -> float {
    return x * 0.5;
}

func main() {
    var acc: float = 0.0;
    for (var r: int = 0; r < 6; r = r + 1) {
        for (var c: int = 0; c < 4; c = c + 1) {
            acc = acc + helper(1.0 * (r * 4 + c));
        }
    }
    emit_num(acc);
}
"#;

    #[test]
    fn block_count_two_nested_loops_one_helper() {
        let p = parse_source(LOOPY).unwrap();
        let blocks = enumerate_blocks(&p);
        assert_eq!(
            blocks.len(),
            3,
            "helper + outer loop + inner loop: {blocks:#?}"
        );
        assert_eq!(blocks[0].kind, BlockKind::Function);
        assert!(blocks[0].memoizable);
        assert_eq!(blocks[1].kind, BlockKind::CountedLoop);
        assert_eq!(blocks[1].path, NodePath(vec![1]));
        assert_eq!(blocks[2].kind, BlockKind::CountedLoop);
        assert_eq!(blocks[2].path, NodePath(vec![1, 3]));
    }

    #[test]
    fn straight_line_program_has_no_loops() {
        let p = parse_source("func main() { emit_num(1); }").unwrap();
        assert!(enumerate_blocks(&p).is_empty());
    }

    #[test]
    fn while_loop_is_general() {
        let src = r#"
func main() {
    var i: int = 0;
    while (i < 10) {
        i = i + 1;
    }
    emit_num(i);
}
"#;
        let p = parse_source(src).unwrap();
        let blocks = enumerate_blocks(&p);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].kind, BlockKind::GeneralLoop);
    }

    #[test]
    fn bound_mutated_in_body_is_general() {
        let src = r#"
func main() {
    var n: int = 10;
    var x: int = 0;
    for (var i: int = 0; i < n; i = i + 1) {
        n = n - 1;
        x = x + 1;
    }
    emit_num(x);
}
"#;
        let p = parse_source(src).unwrap();
        let blocks = enumerate_blocks(&p);
        assert_eq!(blocks[0].kind, BlockKind::GeneralLoop);
    }

    #[test]
    fn memoizable_flags() {
        let src = r#"
var total: float = 0.0;

func pure_weight(t: float) -> float {
    return exp(0.0 - t);
}

func emitter(x: float) -> float {
    emit_num(x);
    return x;
}

func reads_global(x: float) -> float {
    return x + total;
}

func uses_rand(x: float) -> float {
    return x + rand();
}

func calls_impure(x: float) -> float {
    return reads_global(x) * 2.0;
}

func main() {
    total = pure_weight(1.0) + emitter(2.0) + reads_global(3.0)
        + uses_rand(4.0) + calls_impure(5.0);
    emit_num(total);
}
"#;
        let p = parse_source(src).unwrap();
        assert!(is_memoizable(&p, "pure_weight"));
        assert!(!is_memoizable(&p, "emitter"));
        assert!(!is_memoizable(&p, "reads_global"));
        assert!(!is_memoizable(&p, "uses_rand"));
        assert!(!is_memoizable(&p, "calls_impure"), "transitive impurity");
    }

    fn counting_loop(n: u32) -> String {
        format!(
            "func main() {{ var x: int = 0; \
             for (var i: int = 0; i < {n}; i = i + 1) {{ x = x + 1; }} \
             emit_num(x); }}"
        )
    }

    fn loop_block(p: &crate::lang::Program) -> Block {
        enumerate_blocks(p)
            .into_iter()
            .find(|b| b.kind != BlockKind::Function)
            .expect("program has a loop")
    }

    #[test]
    fn truncation_keeps_first_iterations() {
        let p = parse_source(&counting_loop(10)).unwrap();
        let b = loop_block(&p);
        let t = apply_truncation(&p, &b, 0.3).unwrap();
        assert_eq!(run_nums(&t, 0), vec![7.0], "N=10, q=0.3 keeps ceil(7.0)=7");
    }

    #[test]
    fn truncation_zero_is_structural_identity() {
        let p = parse_source(&counting_loop(10)).unwrap();
        let b = loop_block(&p);
        let t = apply_truncation(&p, &b, 0.0).unwrap();
        assert!(ast_eq(&p, &t));
    }

    #[test]
    fn truncation_sum_oracle() {
        // sum of 0..99 truncated by half = sum of 0..49 = 1225
        let src = "func main() { var s: int = 0; \
                    for (var i: int = 0; i < 100; i = i + 1) { s = s + i; } \
                    emit_num(s); }";
        let p = parse_source(src).unwrap();
        let b = loop_block(&p);
        let t = apply_truncation(&p, &b, 0.5).unwrap();
        assert_eq!(run_nums(&t, 0), vec![1225.0]);
    }

    #[test]
    fn truncation_monotone_in_factor() {
        let p = parse_source(&counting_loop(40)).unwrap();
        let b = loop_block(&p);
        let mut last = f64::INFINITY;
        let mut last_cycles = u64::MAX;
        for q in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9] {
            let t = apply_truncation(&p, &b, q).unwrap();
            let (out, cycles) =
                run_continuous(&t, &InputCase::default(), &plat(), 10_000_000, 0).unwrap();
            let executed = match out {
                ProgramOutput::Numeric(v) => v[0],
                _ => unreachable!(),
            };
            assert!(executed <= last, "iterations must not increase with q");
            if q > 0.0 {
                assert!(
                    cycles <= last_cycles,
                    "loop cycles must not increase with q"
                );
                last_cycles = cycles;
            }
            last = executed;
        }
    }

    #[test]
    fn truncation_requires_counted_loop() {
        let src = r#"
func main() {
    var i: int = 0;
    while (i < 10) {
        i = i + 1;
    }
    emit_num(i);
}
"#;
        let p = parse_source(src).unwrap();
        let b = loop_block(&p);
        let err = apply_truncation(&p, &b, 0.5).unwrap_err();
        assert!(matches!(err, TransformError::NotCounted { .. }));
    }

    #[test]
    fn truncation_handles_runtime_bound() {
        // bound is loop-invariant but only known at run time
        let src = r#"
output numeric;
func main() {
    var n: int = in_len();
    var x: int = 0;
    for (var i: int = 0; i < n; i = i + 1) {
        x = x + 1;
    }
    emit_num(x);
}
"#;
        let p = parse_source(src).unwrap();
        let b = loop_block(&p);
        assert_eq!(b.kind, BlockKind::CountedLoop);
        let t = apply_truncation(&p, &b, 0.25).unwrap();
        let input = InputCase::numeric("t", vec![0.0; 8]);
        let out = run_continuous(&t, &input, &plat(), 1_000_000, 0).unwrap().0;
        assert_eq!(out, ProgramOutput::Numeric(vec![6.0]), "ceil(0.75 * 8) = 6");
    }

    #[test]
    fn sampling_executes_every_ith_iteration() {
        for (n, i, expect) in [
            (10u32, 2u32, 5.0f64),
            (10, 3, 4.0),
            (7, 2, 4.0),
            (9, 4, 3.0),
        ] {
            let p = parse_source(&counting_loop(n)).unwrap();
            let b = loop_block(&p);
            let t = apply_sampling(&p, &b, i).unwrap();
            assert_eq!(
                run_nums(&t, 0),
                vec![expect],
                "N={n} factor={i} should run ceil(N/i) bodies"
            );
        }
    }

    #[test]
    fn sampling_one_is_structural_identity() {
        let p = parse_source(&counting_loop(10)).unwrap();
        let b = loop_block(&p);
        let t = apply_sampling(&p, &b, 1).unwrap();
        assert!(ast_eq(&p, &t));
        let (_, base_cycles) =
            run_continuous(&p, &InputCase::default(), &plat(), 1_000_000, 0).unwrap();
        let (_, t_cycles) =
            run_continuous(&t, &InputCase::default(), &plat(), 1_000_000, 0).unwrap();
        assert_eq!(base_cycles, t_cycles);
    }

    #[test]
    fn sampling_applies_to_while_loops() {
        let src = r#"
func main() {
    var i: int = 0;
    var hits: int = 0;
    while (i < 12) {
        hits = hits + 1;
        i = i + 1;
    }
    emit_num(i);
    emit_num(hits);
}
"#;
        let p = parse_source(src).unwrap();
        let b = loop_block(&p);
        let t = apply_sampling(&p, &b, 2).unwrap();
        // skipped bodies do not advance i, so the loop runs 24 control
        // iterations to reach i = 12 with 12 executed bodies
        assert_eq!(run_nums(&t, 0), vec![12.0, 12.0]);
    }

    #[test]
    fn random_zero_is_structural_identity() {
        let p = parse_source(&counting_loop(10)).unwrap();
        let b = loop_block(&p);
        let t = apply_random(&p, &b, 0.0, 1).unwrap();
        assert!(ast_eq(&p, &t));
    }

    #[test]
    fn random_skip_fraction_near_threshold() {
        let p = parse_source(&counting_loop(10_000)).unwrap();
        let b = loop_block(&p);
        let t = apply_random(&p, &b, 0.5, 0).unwrap();
        let executed = run_nums(&t, 12345)[0];
        let skipped_fraction = 1.0 - executed / 10_000.0;
        assert!(
            (skipped_fraction - 0.5).abs() <= 0.02,
            "skip fraction {skipped_fraction} outside 0.5 +/- 0.02"
        );
    }

    #[test]
    fn random_same_seed_is_deterministic() {
        let p = parse_source(&counting_loop(500)).unwrap();
        let b = loop_block(&p);
        let t = apply_random(&p, &b, 0.3, 0).unwrap();
        assert_eq!(run_nums(&t, 42), run_nums(&t, 42));
        assert_ne!(run_nums(&t, 42), run_nums(&t, 43));
    }

    #[test]
    fn random_charges_rng_draws() {
        let p = parse_source(&counting_loop(100)).unwrap();
        let b = loop_block(&p);
        let t = apply_random(&p, &b, 0.001, 0).unwrap();
        let (_, base) = run_continuous(&p, &InputCase::default(), &plat(), 1_000_000, 7).unwrap();
        let (_, with) = run_continuous(&t, &InputCase::default(), &plat(), 1_000_000, 7).unwrap();
        assert!(with > base, "guard and rng draws must cost cycles");
    }

    #[test]
    fn memoization_tol_zero_bit_identical_on_distinct_inputs() {
        let src = r#"
func f(x: float) -> float {
    return sqrt(x) * 3.0 + 1.0;
}

func main() {
    for (var i: int = 0; i < 20; i = i + 1) {
        emit_num(f(1.0 * i));
    }
}
"#;
        let p = parse_source(src).unwrap();
        let blocks = enumerate_blocks(&p);
        let fb = blocks
            .iter()
            .find(|b| b.kind == BlockKind::Function)
            .unwrap();
        let t = apply_memoization(&p, fb, 0.0, 16).unwrap();
        let base = run_continuous(&p, &InputCase::default(), &plat(), 10_000_000, 0).unwrap();
        let memod = run_continuous(&t, &InputCase::default(), &plat(), 10_000_000, 0).unwrap();
        assert!(base.0.bits_eq(&memod.0));
    }

    #[test]
    fn memoization_rejects_unmemoizable() {
        let src = r#"
func noisy(x: float) -> float {
    return x + rand();
}

func main() {
    emit_num(noisy(1.0));
}
"#;
        let p = parse_source(src).unwrap();
        let blocks = enumerate_blocks(&p);
        let fb = blocks
            .iter()
            .find(|b| b.kind == BlockKind::Function)
            .unwrap();
        let err = apply_memoization(&p, fb, 0.1, 16).unwrap_err();
        assert!(matches!(err, TransformError::NotMemoizable { .. }));
    }

    #[test]
    fn transforms_leave_other_functions_untouched() {
        let p = parse_source(LOOPY).unwrap();
        let blocks = enumerate_blocks(&p);
        let inner = blocks
            .iter()
            .find(|b| b.path == NodePath(vec![1, 3]))
            .unwrap();
        let t = apply_sampling(&p, inner, 3).unwrap();
        let orig_helper = pretty_print(&p)
            .lines()
            .take_while(|l| !l.contains("func main"))
            .collect::<Vec<_>>()
            .join("\n");
        let new_helper = pretty_print(&t)
            .lines()
            .take_while(|l| !l.contains("func main"))
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(orig_helper, new_helper);
    }

    #[test]
    fn transformed_programs_roundtrip() {
        let p = parse_source(LOOPY).unwrap();
        let blocks = enumerate_blocks(&p);
        let outer = blocks.iter().find(|b| b.path == NodePath(vec![1])).unwrap();
        let inner = blocks
            .iter()
            .find(|b| b.path == NodePath(vec![1, 3]))
            .unwrap();
        for t in [
            apply_truncation(&p, outer, 0.25).unwrap(),
            apply_sampling(&p, inner, 2).unwrap(),
            apply_random(&p, outer, 0.4, 7).unwrap(),
        ] {
            let printed = pretty_print(&t);
            let back = parse_source(&printed).unwrap();
            assert!(
                ast_eq(&t, &back),
                "round-trip changed transformed tree:\n{printed}"
            );
        }
    }

    #[test]
    fn uniform_config_hits_nested_loops_and_functions() {
        let p = parse_source(LOOPY).unwrap();
        let blocks = enumerate_blocks(&p);
        let loops: Vec<&Block> = blocks
            .iter()
            .filter(|b| b.kind != BlockKind::Function)
            .collect();
        let funcs: Vec<&Block> = blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Function)
            .collect();
        let config = ApproxConfig {
            loop_technique: ApproxTechnique::Sampling { factor: 2 },
            memo_technique: ApproxTechnique::Memoization {
                tolerance: 0.0,
                capacity: 16,
            },
            seed: 0,
        };
        let t = apply_config(&p, &loops, &funcs, &config).unwrap();
        // outer samples 3 of 6 rows, inner 2 of 4 cols -> 6 helper calls
        // (0,0),(0,2),(2,0),(2,2),(4,0),(4,2) -> acc = (0+2+8+10+16+18)/2
        assert_eq!(run_nums(&t, 0), vec![27.0]);
        assert!(t.function("helper").unwrap().memo.is_some());
        // fresh counter names must not collide
        let printed = pretty_print(&t);
        assert!(printed.contains("samp_k"));
        assert!(printed.contains("samp_k_1"));
    }

    #[test]
    fn identity_config_is_noop() {
        let p = parse_source(LOOPY).unwrap();
        let blocks = enumerate_blocks(&p);
        let loops: Vec<&Block> = blocks
            .iter()
            .filter(|b| b.kind != BlockKind::Function)
            .collect();
        let config = ApproxConfig {
            loop_technique: ApproxTechnique::Truncation { factor: 0.0 },
            memo_technique: ApproxTechnique::Memoization {
                tolerance: 0.0,
                capacity: 16,
            },
            seed: 0,
        };
        let t = apply_config(&p, &loops, &[], &config).unwrap();
        assert!(ast_eq(&p, &t));
    }
}
