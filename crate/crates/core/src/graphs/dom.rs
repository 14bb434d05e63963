//! Postdominators and control dependence on plain adjacency lists.

use std::collections::VecDeque;

pub const UNREACHABLE: u32 = u32::MAX;

/// Immediate postdominators via the Cooper-Harvey-Kennedy iteration on the
/// reverse graph. `ipdom[exit] == Some(exit)`; nodes that cannot reach
/// `exit` get `None`.
pub fn immediate_postdominators(succ: &[Vec<usize>], exit: usize) -> Vec<Option<usize>> {
    let n = succ.len();
    let mut pred = vec![vec![]; n];
    for (a, ss) in succ.iter().enumerate() {
        for &b in ss {
            pred[b].push(a);
        }
    }

    // postorder of a DFS from exit over reversed edges
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut stack = vec![(exit, 0usize)];
    seen[exit] = true;
    while let Some(&mut (v, ref mut i)) = stack.last_mut() {
        if *i < pred[v].len() {
            let w = pred[v][*i];
            *i += 1;
            if !seen[w] {
                seen[w] = true;
                stack.push((w, 0));
            }
        } else {
            order.push(v);
            stack.pop();
        }
    }
    let mut po_num = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        po_num[v] = i;
    }

    let mut ipdom: Vec<Option<usize>> = vec![None; n];
    ipdom[exit] = Some(exit);
    let intersect = |ipdom: &[Option<usize>], mut a: usize, mut b: usize| {
        while a != b {
            while po_num[a] < po_num[b] {
                a = ipdom[a].unwrap();
            }
            while po_num[b] < po_num[a] {
                b = ipdom[b].unwrap();
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &v in order.iter().rev() {
            if v == exit {
                continue;
            }
            let mut new: Option<usize> = None;
            for &s in &succ[v] {
                if ipdom[s].is_none() {
                    continue;
                }
                new = Some(match new {
                    None => s,
                    Some(x) => intersect(&ipdom, x, s),
                });
            }
            if new.is_some() && ipdom[v] != new {
                ipdom[v] = new;
                changed = true;
            }
        }
    }
    ipdom
}

/// Control dependences as `(controller, edge index in succ[controller],
/// dependent)`: the dependent postdominates the edge's target but does not
/// strictly postdominate the controller.
pub fn control_dependences(succ: &[Vec<usize>], exit: usize) -> Vec<(usize, usize, usize)> {
    let ipdom = immediate_postdominators(succ, exit);
    let mut out = vec![];
    for (a, ss) in succ.iter().enumerate() {
        let Some(stop) = ipdom[a] else { continue };
        for (ei, &b) in ss.iter().enumerate() {
            if a == exit || ipdom[b].is_none() {
                continue;
            }
            let mut runner = b;
            while runner != stop {
                out.push((a, ei, runner));
                if runner == exit {
                    break;
                }
                runner = ipdom[runner].unwrap();
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Hop distances to `start` along reversed edges (`pred` lists); unreached
/// nodes get [`UNREACHABLE`].
pub fn reverse_bfs(pred: &[Vec<usize>], start: usize) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; pred.len()];
    dist[start] = 0;
    let mut q = VecDeque::from([start]);
    while let Some(v) = q.pop_front() {
        for &p in &pred[v] {
            if dist[p] == UNREACHABLE {
                dist[p] = dist[v] + 1;
                q.push_back(p);
            }
        }
    }
    dist
}

/// Backwards breadth-first search from `target`: the depth at which the
/// first node with `covered[n]` is met.
pub fn first_covered_depth(pred: &[Vec<usize>], covered: &[bool], target: usize) -> Option<u32> {
    if covered[target] {
        return Some(0);
    }
    let mut seen = vec![false; pred.len()];
    seen[target] = true;
    let mut frontier = vec![target];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next = vec![];
        for v in frontier {
            for &p in &pred[v] {
                if seen[p] {
                    continue;
                }
                if covered[p] {
                    return Some(depth);
                }
                seen[p] = true;
                next.push(p);
            }
        }
        frontier = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond() {
        // 0 -> 1 | 2 -> 3 -> exit(4)
        let succ = vec![vec![1, 2], vec![3], vec![3], vec![4], vec![]];
        let ipdom = immediate_postdominators(&succ, 4);
        assert_eq!(ipdom, vec![Some(3), Some(3), Some(3), Some(4), Some(4)]);
        let cd = control_dependences(&succ, 4);
        assert_eq!(cd, vec![(0, 0, 1), (0, 1, 2)]);
    }

    #[test]
    fn loop_header_depends_on_itself() {
        // 0 -> 1; 1 -> 2 | 3; 2 -> 1; 3 exit
        let succ = vec![vec![1], vec![2, 3], vec![1], vec![]];
        let cd = control_dependences(&succ, 3);
        assert!(cd.contains(&(1, 0, 2)));
        assert!(cd.contains(&(1, 0, 1)));
    }

    #[test]
    fn covered_depth() {
        let pred = vec![vec![], vec![0], vec![1], vec![2]];
        assert_eq!(first_covered_depth(&pred, &[true, false, false, false], 3), Some(3));
        assert_eq!(first_covered_depth(&pred, &[false, false, true, false], 3), Some(1));
        assert_eq!(first_covered_depth(&pred, &[false; 4], 3), None);
    }
}
