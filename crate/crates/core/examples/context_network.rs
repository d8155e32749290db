//! Populate a context and query its network projection.

use mnegoti::{Context, EdgeLabel, ObjectKey, ObjectKind};

fn main() -> Result<(), mnegoti::Error> {
    let mut context = Context::new();
    for id in 0..6 {
        context.add(ObjectKey::agent(id))?;
    }
    context.add(ObjectKey::room(0))?;

    if let Err(e) = context.add(ObjectKey::agent(3)) {
        println!("second add rejected: {e}");
    }

    context.add_projection("network");
    context.connect_group("network", &[0, 1, 2])?;
    context.connect_group("network", &[3, 4, 5])?;
    context.add_edge("network", 2, 3, EdgeLabel::Social)?;

    for id in 0..6 {
        let all = context.neighbors("network", id, None)?;
        let social = context.neighbors("network", id, Some(EdgeLabel::Social))?;
        println!("agent {id}: neighbors {all:?}, social {social:?}");
    }

    context.remove(ObjectKey::agent(2))?;
    let agents = context.query(|k| k.kind == ObjectKind::Agent);
    println!("after removing agent 2: {} agents, neighbors of 3 = {:?}", agents.len(), context.neighbors("network", 3, None)?);
    Ok(())
}
