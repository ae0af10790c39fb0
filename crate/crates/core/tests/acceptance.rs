// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use ark_bls12_381::{Fr, G1Affine};
use ark_ec::{AffineRepr, CurveGroup};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rollup_sim::contract::{
    commitment_key, commitment_leaf, AuditVerdict, Contract, ContractConfig, ContractError, ContractMessage,
    FraudVerdict, LoggedMessage, PartyId, ProtocolParams,
};
use rollup_sim::crypto::{smt, SmtKey, SparseMerkleTree};
use rollup_sim::crypto::{Digest, MerkleProof};
use rollup_sim::dac::{
    points_per_party, sample_and_reconstruct, DacError, DacMember, MemberPolicy, SampleRequest, SampleResponse,
    SampleSource, SamplingConfig, SAMPLING_PARTIES,
};
use rollup_sim::kzg::{
    combine_commitments, commit, open_at, setup, verify_opening, EncodingParams, FieldElement, KzgCommitment,
    OpeningProof, Polynomial, TrustedSetup,
};
use rollup_sim::sim::bundle::{fetch_verified, member_infos, publish};
use rollup_sim::sim::{gallery, run_scenario, Scenario, Transcript};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("fraud-proof soundness", soundness),
        ("fraud-proof completeness", completeness),
        ("bisection round count", round_count),
        ("SMT transition oracle", smt_oracle),
        ("KZG suite", kzg_suite),
        ("audit game", audit_game),
        ("sampling reconstruction", sampling),
        ("size limit", size_limit),
        ("determinism", determinism),
        ("replay integrity", replay_integrity),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.iter().any(|o| o == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(text: &str) -> Scenario {
    Scenario::from_toml(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

fn run(s: &Scenario) -> Result<Transcript, String> {
    run_scenario(s).map_err(|e| format!("{}: {e}", s.name))
}

fn fraud_scenario(name: &str, seed: u64, txs: u64, executor: &str, validators: &[&str]) -> Scenario {
    let mut text = format!(
        "name = \"{name}\"\nseed = {seed}\n\n[[nodes]]\nid = \"exec\"\nrole = \"executor\"\npolicy = {executor}\n"
    );
    for (i, v) in validators.iter().enumerate() {
        text += &format!("\n[[nodes]]\nid = \"val-{}\"\nrole = \"validator\"\npolicy = {v}\n", i + 1);
    }
    text += &format!("\n[[slots]]\nrandom = {txs}\n");
    scenario(&text)
}

/// Criterion 1.
fn soundness() -> Outcome {
    let kinds = ["corrupt_ma_at_step", "wrong_root", "wrong_chain"];
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut convicted = 0;
    for seed in 0..100u64 {
        let t = rng.gen_range(1..=64u64);
        let step = rng.gen_range(1..=t);
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let policy = format!("{{ kind = \"{kind}\", slot = 0, step = {step} }}");
        let s = fraud_scenario(&format!("soundness-{seed}"), 1000 + seed, t, &policy, &["{ kind = \"honest\" }"]);
        let tr = run(&s)?;
        let verdicts = tr.summary.fraud_verdicts();
        ensure(verdicts == [Some(FraudVerdict::DefenderLied)], || {
            format!("seed {} ({kind}, t={t}, step={step}): verdicts {verdicts:?}", s.seed)
        })?;
        convicted += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("DefenderLied in {convicted}/100, limit 60s"))
}

/// Criterion 2.
fn completeness() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (mut slashed, mut timed_out) = (0, 0);
    for seed in 0..100u64 {
        let t = rng.gen_range(1..=64u64);
        let liar = if rng.gen_bool(0.5) { "false_challenge" } else { "stall_after_midpoint" };
        let s = fraud_scenario(
            &format!("completeness-{seed}"),
            2000 + seed,
            t,
            "{ kind = \"honest\" }",
            &["{ kind = \"honest\" }", &format!("{{ kind = \"{liar}\" }}")],
        );
        let tr = run(&s)?;
        let ctx = || format!("seed {} ({liar}, t={t})", s.seed);
        ensure(!tr.summary.fraud_games.is_empty(), || format!("{}: no game opened", ctx()))?;
        for g in &tr.summary.fraud_games {
            ensure(g.verdict == Some(FraudVerdict::ChallengerLied), || format!("{}: verdict {:?}", ctx(), g.verdict))?;
            if g.by_timeout {
                timed_out += 1;
            } else {
                slashed += 1;
            }
        }
        let exec = tr.summary.balances.get(&PartyId::new("exec")).copied().unwrap_or(0);
        ensure(exec >= 0, || format!("{}: executor delta {exec}", ctx()))?;
        ensure(tr.summary.committed_slots == 1 && tr.summary.voided_slots == 0, || format!("{}: slot voided", ctx()))?;
    }
    Ok(format!("executor never slashed; challenger slashed {slashed}, timed out {timed_out}"))
}

/// Criterion 3.
fn round_count() -> Outcome {
    let mut seen = Vec::new();
    for t in [1u64, 2, 3, 17, 64] {
        let policy = format!("{{ kind = \"corrupt_ma_at_step\", slot = 0, step = {t} }}");
        let s = fraud_scenario(&format!("rounds-{t}"), 300 + t, t, &policy, &["{ kind = \"honest\" }"]);
        let tr = run(&s)?;
        let g = tr.summary.fraud_games.first().ok_or(format!("t={t}: no game"))?;
        let want = common::ceil_log2(t);
        ensure(g.verdict == Some(FraudVerdict::DefenderLied), || format!("t={t}: verdict {:?}", g.verdict))?;
        ensure(g.challenger_responses == want, || format!("t={t}: {} responses, want {want}", g.challenger_responses))?;
        seen.push(format!("t={t}:{}", g.challenger_responses));
    }
    Ok(seen.join(" "))
}

/// Criterion 4. Each case's tree is the previous case's tree after a random
/// write batch; target sizes are redrawn uniformly from `0..=1024` so the
/// cases sweep the whole size range.
fn smt_oracle() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut oracle = common::SmtOracle::new();
    let mut leaves: BTreeMap<[u8; 32], [u8; 32]> = BTreeMap::new();
    let mut tree = SparseMerkleTree::new();
    let mut target = 0;
    let (mut min_n, mut max_n, mut total_n, mut total_w) = (usize::MAX, 0, 0, 0);
    let start = Instant::now();
    for case in 0..1000 {
        if case % 40 == 0 {
            target = rng.gen_range(0..=1024usize);
        }
        let n = leaves.len();
        let existing: Vec<[u8; 32]> = leaves.keys().copied().collect();
        let w = rng.gen_range(1..=64usize);
        let mut writes: BTreeMap<[u8; 32], Option<[u8; 32]>> = BTreeMap::new();
        let mut size = n;
        while writes.len() < w {
            let grow = size < target || (size == target && rng.gen_bool(0.5));
            let unused = existing.len() > writes.keys().filter(|k| leaves.contains_key(*k)).count();
            let pick_existing = unused && !(grow && rng.gen_bool(0.8));
            let key = if pick_existing { existing[rng.gen_range(0..existing.len())] } else { rng.gen() };
            if writes.contains_key(&key) {
                continue;
            }
            let value = if pick_existing && !grow && size > 0 && rng.gen_bool(0.8) { None } else { Some(rng.gen()) };
            match (leaves.contains_key(&key), value.is_some()) {
                (false, true) if size < 1024 => size += 1,
                (false, true) => continue,
                (true, false) => size -= 1,
                _ => {}
            }
            writes.insert(key, value);
        }

        let root = tree.root();
        ensure(root.0 == oracle.root(&leaves), || format!("case {case}: stored tree differs from the rebuild"))?;
        let writes: Vec<(SmtKey, Option<Digest>)> =
            writes.into_iter().map(|(k, v)| (SmtKey(Digest(k)), v.map(Digest))).collect();
        let proofs: Vec<MerkleProof> = writes.iter().map(|(k, _)| tree.prove(k)).collect();
        let got = smt::transition(&root, &proofs, &writes).map_err(|e| format!("case {case}: {e}"))?;
        for (k, v) in &writes {
            match v {
                Some(v) => leaves.insert(k.0 .0, v.0),
                None => leaves.remove(&k.0 .0),
            };
            tree.insert(*k, *v);
        }
        let want = oracle.root(&leaves);
        ensure(got.0 == want, || format!("case {case}: n={n} w={w} roots differ"))?;
        ensure(leaves.len() <= 1024, || format!("case {case}: tree grew past 1024"))?;
        min_n = min_n.min(n);
        max_n = max_n.max(n);
        total_n += n;
        total_w += w;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "1000/1000 match the full rebuild (trees {min_n}..{max_n} leaves, mean {}, mean write set {}), limit 30s",
        total_n / 1000,
        total_w / 1000
    ))
}

fn random_poly(rng: &mut impl RngCore, degree: usize) -> Vec<FieldElement> {
    (0..=degree).map(|_| FieldElement::random(rng)).collect()
}

/// Criterion 5.
fn kzg_suite() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let srs = setup(255, b"acceptance-kzg").map_err(|e| e.to_string())?;
    for case in 0..100 {
        let n = rng.gen_range(1..=255usize);
        let t = rng.gen_range(1..=32usize);
        let terms: Vec<(FieldElement, Vec<FieldElement>)> = (0..t)
            .map(|_| {
                let degree = rng.gen_range(0..=n);
                (FieldElement::random(&mut rng), random_poly(&mut rng, degree))
            })
            .collect();
        let mut cms = Vec::new();
        for (r, f) in &terms {
            cms.push((*r, commit(&srs, &Polynomial::new(f.clone())).map_err(|e| e.to_string())?));
        }
        let combined = combine_commitments(&cms);
        let direct = commit(&srs, &Polynomial::new(common::combine_coeffs(&terms))).map_err(|e| e.to_string())?;
        ensure(combined == direct, || format!("homomorphism case {case}: n={n} t={t}"))?;
    }

    let mut rejected = 0;
    for trial in 0..100 {
        let n = rng.gen_range(1..=255usize);
        let poly = Polynomial::new(random_poly(&mut rng, n));
        let cm = commit(&srs, &poly).map_err(|e| e.to_string())?;
        let proof = open_at(&srs, &poly, FieldElement::random(&mut rng)).map_err(|e| e.to_string())?;
        ensure(verify_opening(&srs, &cm, &proof), || format!("trial {trial}: honest opening rejected"))?;
        let delta = FieldElement::random(&mut rng);
        let mutants = [
            OpeningProof { point: proof.point + delta, ..proof },
            OpeningProof { value: proof.value + delta, ..proof },
            shifted_witness(&proof, rng.gen_range(1..u64::MAX)),
        ];
        for (coord, m) in mutants.iter().enumerate() {
            ensure(!verify_opening(&srs, &cm, m), || {
                format!("trial {trial}: mutation of coordinate {coord} accepted")
            })?;
        }
        rejected += 1;
    }
    Ok(format!("homomorphism 100/100; mutations rejected in {rejected}/100 trials (all 3 coordinates)"))
}

fn shifted_witness(proof: &OpeningProof, k: u64) -> OpeningProof {
    let witness = (proof.witness + G1Affine::generator() * Fr::from(k)).into_affine();
    OpeningProof { witness, ..*proof }
}

/// Criterion 6.
fn audit_game() -> Outcome {
    let mut text = String::from(
        "name = \"audit-acceptance\"\nseed = 6\n\n[dac]\ndegree_bound = 15\npolicies = [\"honest\", \"honest\", \"honest\", \"lose_data\"]\n\n\
         [[nodes]]\nid = \"exec\"\nrole = \"executor\"\n\n[[nodes]]\nid = \"val-1\"\nrole = \"validator\"\n",
    );
    for _ in 0..4 {
        text += "\n[[slots]]\nrandom = 8\n";
    }
    let mut expected = Vec::new();
    let mut tick = 200;
    for t in [1u64, 8, 32] {
        let cases = [
            ("honest", "{ kind = \"honest\" }", "{ kind = \"honest\" }", 0, AuditVerdict::StorageProven),
            (
                "inflating opener",
                &*format!("{{ kind = \"inflate\", from = {} }}", t / 2 + 1),
                "{ kind = \"honest\" }",
                1,
                AuditVerdict::OpenerLied,
            ),
            ("lost data", "{ kind = \"honest\" }", "{ kind = \"honest\" }", 3, AuditVerdict::ProviderLied),
            (
                "disputing provider",
                "{ kind = \"honest\" }",
                "{ kind = \"dispute_all\" }",
                2,
                AuditVerdict::ProviderLied,
            ),
        ];
        for (label, opener, provider, member, verdict) in cases {
            if t == 1 && label == "disputing provider" {
                // A single entry is pinned at open; there is no claim to dispute.
                continue;
            }
            text += &format!(
                "\n[[audits]]\ntick = {tick}\nopener = \"val-1\"\nprovider = {member}\nstart = 0\nend = {t}\n\
                 opener_behavior = {opener}\nprovider_behavior = {provider}\n"
            );
            expected.push((t, label, verdict));
            tick += 60;
        }
    }
    let s = scenario(&text);
    let tr = run(&s)?;
    let contract = common::replay_contract(&tr);
    let state = contract.state();
    ensure(state.da_registry.len() >= 32, || format!("only {} registry entries", state.da_registry.len()))?;
    ensure(state.audit_games.len() == expected.len(), || {
        format!("{} games for {} audits", state.audit_games.len(), expected.len())
    })?;

    let mut pinned = 0;
    for ((t, label, want), g) in expected.iter().zip(state.audit_games.values()) {
        ensure(g.entries() == *t, || format!("{label} t={t}: game over {} entries", g.entries()))?;
        ensure(g.verdict == Some(*want), || format!("{label} t={t}: verdict {:?}, want {want:?}", g.verdict))?;
        if *want == AuditVerdict::StorageProven {
            ensure(g.opening_valid == Some(true), || format!("{label} t={t}: opening not verified"))?;
        }
        let cms: Vec<KzgCommitment> =
            state.da_registry[g.start as usize..g.end as usize].iter().map(|e| e.cm).collect();
        let sums = common::prefix_sums(&g.randoms, &cms);
        if let Some(c) = &g.step_check {
            let i = c.index as usize;
            ensure(c.lo_sum == sums[i - 1], || format!("{label} t={t}: lower sum at {i} is not the oracle prefix"))?;
            ensure(c.recomputed == sums[i], || format!("{label} t={t}: recomputed sum at {i} differs from oracle"))?;
            ensure(c.holds == (c.hi_sum == sums[i]), || {
                format!("{label} t={t}: step check verdict differs from oracle")
            })?;
            pinned += 1;
        }
    }
    Ok(format!(
        "{} games convict the right party; {pinned} pinned step checks match the prefix-sum oracle",
        expected.len()
    ))
}

struct Serving<'a> {
    member: &'a DacMember,
    membership: MerkleProof,
    /// `(party, opening)` to corrupt in the first round.
    corrupt: Option<(usize, usize)>,
}

impl SampleSource for Serving<'_> {
    fn respond(&self, party: usize, round: usize, req: &SampleRequest) -> Result<SampleResponse, DacError> {
        let mut openings = self.member.dac_open(&req.cm, &req.points)?;
        if let Some((p, j)) = self.corrupt {
            if p == party && round == 0 {
                openings[j].value += FieldElement::one();
            }
        }
        Ok(SampleResponse { cm: req.cm, openings, membership: self.membership.clone() })
    }
}

/// Criterion 7.
fn sampling() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut report = Vec::new();
    for n in [15usize, 63, 255] {
        let srs = Arc::new(setup(n, format!("sampling-{n}").as_bytes()).map_err(|e| e.to_string())?);
        let params = EncodingParams::new(n);
        let per = points_per_party(n, SAMPLING_PARTIES);
        ensure(per == (n + 1).div_ceil(16), || format!("n={n}: {per} points per party"))?;
        let trials = if n == 255 { 2 } else { 4 };
        for trial in 0..trials {
            let len = rng.gen_range(0..=params.max_blob_bytes());
            let mut blob = vec![0u8; len];
            rng.fill_bytes(&mut blob);
            let mut member = DacMember::new(0, trial, MemberPolicy::Honest, srs.clone(), params);
            let pieces = publish(&blob, &srs, &params, std::slice::from_mut(&mut member)).map_err(|e| e.to_string())?;
            ensure(pieces.len() == 1, || format!("n={n}: blob of {len} bytes split"))?;
            let cm = pieces[0].cm;
            let index = rng.gen_range(0..8u64);
            let mut registry = SparseMerkleTree::new();
            registry.insert(commitment_key(index), Some(commitment_leaf(&cm)));
            let membership = registry.prove(&commitment_key(index));
            let seed = rng.next_u64();
            let cfg = SamplingConfig::default();
            let honest = Serving { member: &member, membership: membership.clone(), corrupt: None };
            let out = sample_and_reconstruct(&honest, index, &cm, &registry.root(), &srs, &params, seed, &cfg)
                .map_err(|e| format!("n={n}: {e}"))?;
            ensure(out.blob == blob, || format!("n={n} trial {trial}: blob differs"))?;
            ensure(out.rounds == 1 && out.rejected == 0, || format!("n={n}: {} rounds", out.rounds))?;
            let recommitted =
                commit(&srs, &rollup_sim::kzg::encode_blob(&out.blob, &params).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
            ensure(recommitted == cm, || format!("n={n}: recomputed commitment differs"))?;

            let corrupt = (rng.gen_range(0..SAMPLING_PARTIES), rng.gen_range(0..per));
            let tampered = Serving { member: &member, membership, corrupt: Some(corrupt) };
            let out2 = sample_and_reconstruct(&tampered, index, &cm, &registry.root(), &srs, &params, seed, &cfg)
                .map_err(|e| format!("n={n} corrupted: {e}"))?;
            ensure(out2.blob == blob && out2.rejected == 1, || {
                format!("n={n}: corrupted opening changed the outcome")
            })?;
        }
        report.push(format!("n={n}: {trials}/{trials} exact, {per} pts/party"));
    }
    Ok(report.join("; "))
}

fn direct_config(members: &[DacMember], srs: Arc<TrustedSetup>) -> ContractConfig {
    let mut initial_balances = BTreeMap::new();
    initial_balances.insert(PartyId::new("exec"), 10_000);
    ContractConfig {
        params: ProtocolParams::default(),
        dac_members: member_infos(members),
        setup: srs,
        genesis_root: SparseMerkleTree::empty_root(),
        initial_balances,
    }
}

/// Criterion 8.
fn size_limit() -> Outcome {
    let srs = Arc::new(setup(255, b"size-limit").map_err(|e| e.to_string())?);
    let params = EncodingParams::new(255);
    let mut members: Vec<DacMember> =
        (0..4).map(|i| DacMember::new(i, 8, MemberPolicy::Honest, srs.clone(), params)).collect();
    let mut contract = Contract::new(direct_config(&members, srs.clone()));
    let exec = PartyId::new("exec");
    let post = |len: usize| LoggedMessage {
        tick: 1,
        sender: exec.clone(),
        msg: ContractMessage::PostData { payload: vec![0xab; len] },
    };
    contract.apply(post(1232)).map_err(|e| format!("1232 bytes rejected: {e}"))?;
    match contract.apply(post(1233)) {
        Err(ContractError::PayloadTooLarge { size: 1233, max: 1232 }) => {}
        other => return Err(format!("1233 bytes: {other:?}")),
    }

    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut blob = vec![0u8; 1 << 20];
    rng.fill_bytes(&mut blob);
    ensure(contract.apply(post(blob.len())).is_err(), || "1 MiB accepted on the direct path".into())?;
    let pieces = publish(&blob, &srs, &params, &mut members).map_err(|e| e.to_string())?;
    let mut largest = 0;
    for (i, piece) in pieces.iter().enumerate() {
        let msg = ContractMessage::RegisterDa { cm: piece.cm, signatures: piece.signatures.clone() };
        largest = largest.max(msg.direct_payload_size().unwrap_or(0));
        contract
            .apply(LoggedMessage { tick: 2 + i as u64, sender: exec.clone(), msg })
            .map_err(|e| format!("piece {i}: {e}"))?;
    }
    let registry = &contract.state().da_registry;
    let mut rebuilt = Vec::with_capacity(blob.len());
    for (i, entry) in registry.iter().enumerate() {
        let (data, _) = fetch_verified(&entry.cm, &srs, &params, &members);
        rebuilt.extend(data.ok_or(format!("piece {i} unavailable"))?);
    }
    ensure(rebuilt == blob, || "1 MiB blob did not round-trip".into())?;
    Ok(format!(
        "1232 accepted, 1233 rejected; 1 MiB as {} registered pieces (largest call {largest} bytes), byte-equal",
        pieces.len()
    ))
}

/// Criterion 9.
fn determinism() -> Outcome {
    let mut count = 0;
    for (name, text) in gallery() {
        let s = scenario(text);
        let a = run(&s)?.to_bytes();
        let b = run(&s)?.to_bytes();
        ensure(a == b, || format!("{name}: transcripts differ"))?;
        count += 1;
    }
    Ok(format!("{count} bundled scenarios byte-identical across two runs"))
}

/// Criterion 10.
fn replay_integrity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_rollup-sim");
    let path = dir.path().join("honest.json");
    let status = Command::new(bin).args(["run", "honest", "--out"]).arg(&path).output().map_err(|e| e.to_string())?;
    ensure(status.status.success(), || format!("run failed: {}", String::from_utf8_lossy(&status.stderr)))?;
    let check = |p: &std::path::Path| Command::new(bin).arg("check").arg(p).output().map(|o| o.status.success());
    ensure(check(&path).map_err(|e| e.to_string())?, || "untampered transcript rejected".into())?;

    let original = std::fs::read(&path).map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let flipped = dir.path().join("flipped.json");
    let mut caught = 0;
    for probe in 0..20 {
        let mut bytes = original.clone();
        let at = rng.gen_range(0..bytes.len());
        bytes[at] ^= rng.gen_range(1..=255u8);
        std::fs::write(&flipped, &bytes).map_err(|e| e.to_string())?;
        ensure(!check(&flipped).map_err(|e| e.to_string())?, || format!("probe {probe}: flip at byte {at} accepted"))?;
        caught += 1;
    }
    Ok(format!("clean transcript verifies; {caught}/20 byte flips rejected"))
}
