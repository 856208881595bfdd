//! Model-only properties: no protocol code is involved.

mod common;

use mnm_core::model::{ChangePolicy, Memory, OpRequest, OpResponse, Permission, RegId, RegName, RegionId, RegionSpec};
use mnm_core::sim::{Action, Actor};
use mnm_core::{Mid, Pid};
use proptest::prelude::*;

use common::{execute, model_verdicts, workload, POLICIES};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_workloads_conform(seed in any::<u64>()) {
        let w = workload(seed);
        for v in model_verdicts(&w) {
            prop_assert!(v.ok, "{:?} in {:?}", v, w.setup);
        }
    }

    #[test]
    fn memory_ops_take_two_delays(seed in any::<u64>()) {
        let t = execute(&workload(seed)).trace;
        for e in &t.entries {
            if let Action::Complete { invoked_at, .. } = e.action {
                prop_assert_eq!(e.time, invoked_at + 2);
            }
        }
    }

    /// A permission change applies iff the region's policy allows it.
    #[test]
    fn legal_change_gating(policy in 0..POLICIES.len(), changes in prop::collection::vec((0u16..4, 0u8..4), 0..20)) {
        let n = 3;
        let policy = POLICIES[policy];
        let mut mem = Memory::new(Mid(1), n);
        let region = RegionId(0);
        mem.add_region(RegionSpec { id: region, permission: Permission::single_writer(Pid(1), n), policy }).unwrap();
        for (who, kind) in changes {
            let p = Pid(who % n as u16 + 1);
            let new = match kind {
                0 => Permission::read_only(n),
                1 => Permission::exclusive(p, n),
                2 => Permission::open(n),
                _ => Permission::exclusive(Pid(p.0 % n as u16 + 1), n),
            };
            let before = mem.permission(region).unwrap().clone();
            let legal = policy.allows(p, &new, n);
            let resp = mem.apply(p, &OpRequest::ChangePermission { region, permission: new.clone() });
            prop_assert_eq!(resp, OpResponse::ChangePermission { applied: legal });
            let after = mem.permission(region).unwrap();
            prop_assert_eq!(after, if legal { &new } else { &before });
        }
    }

    /// Reads and writes succeed exactly when the current permission allows
    /// them, and refused writes leave the register untouched.
    #[test]
    fn permission_soundness(ops in prop::collection::vec((0u16..3, any::<bool>(), 0u8..3), 0..30)) {
        let n = 3;
        let mut mem = Memory::new(Mid(1), n);
        let region = RegionId(0);
        mem.add_region(RegionSpec { id: region, permission: Permission::single_writer(Pid(2), n), policy: ChangePolicy::ExclusiveWriter }).unwrap();
        let reg = RegId::new(region, RegName::new(0, 0, 0));
        for (who, write, v) in ops {
            let p = Pid(who + 1);
            let perm = mem.permission(region).unwrap().clone();
            if write {
                let before = mem.peek(reg);
                let ok = mem.write(p, reg, bytes::Bytes::from(vec![v])).is_ok();
                prop_assert_eq!(ok, perm.can_write(p));
                if !ok {
                    prop_assert_eq!(mem.peek(reg), before);
                }
            } else if v == 0 {
                mem.change_permission(p, region, Permission::exclusive(p, n));
            } else {
                prop_assert_eq!(mem.read(p, reg).is_ok(), perm.can_read(p));
            }
        }
    }
}

#[test]
fn crashed_memories_go_silent() {
    // find workloads with a memory crash and check nothing completes there afterwards
    let mut seen = 0;
    for seed in 0..300 {
        let t = execute(&workload(seed)).trace;
        for &m in &t.crashed_memories {
            seen += 1;
            let crash = t.entries.iter().position(|e| matches!(e.action, Action::Fault { target: mnm_core::sim::FaultTarget::Memory(x), .. } if x == m)).unwrap();
            assert!(t.entries[crash..].iter().all(|e| e.actor != Actor::Memory(m)), "seed {seed}");
        }
    }
    assert!(seen > 10);
}
