//! Turn a timestamped edge list with string node names into a snapshot
//! sequence, then write it out in the snapshot text format.

use dlaim::io::{aggregate_windows, format_snapshots, parse_events, NodeDictionary, WindowSpec};

const EVENTS: &str = "\
# seconds, sender, receiver
0, alice, bob
30, bob, carol
59, carol, alice
61, dave, alice
95, alice, alice
130, bob, dave
170, dave, carol
";

fn main() -> dlaim::Result<()> {
    let mut dict = NodeDictionary::new();
    let events = parse_events(EVENTS, &mut dict, "inline")?;
    let spec = WindowSpec {
        start: 0.0,
        width: 60.0,
        n_windows: None,
    };
    let snaps = aggregate_windows(&events, dict.len(), true, spec)?;
    println!("{} events, {} nodes, {} one-minute snapshots", events.len(), dict.len(), snaps.horizon());
    print!("{}", format_snapshots(&snaps));
    print!("{}", dict.to_csv()?);
    Ok(())
}
