//! Direction map, gates, illegal turns and local Whitehead graphs of Φ.

use ttk::maps::GraphSelfMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = GraphSelfMap::rose(&[("A", "A C"), ("B", "A"), ("C", "B")])?;
    let g = m.graph();
    let gates = m.gates();
    for (i, gate) in gates.gates.iter().enumerate() {
        let names: Vec<String> = gate.iter().map(|&d| g.token(d)).collect();
        println!("gate {i}: {{{}}}", names.join(", "));
    }
    let illegal: Vec<String> = gates.illegal_turns.iter().map(|t| m.turn_label(t)).collect();
    println!("illegal turns: {}", illegal.join(" "));
    println!("train track: {}", m.is_train_track().train_track);
    for v in 0..g.vertex_count() {
        let wg = m.local_whitehead_graph(v);
        let edges: Vec<String> = wg.edges.iter().map(|t| m.turn_label(t)).collect();
        println!("Whitehead graph at {}: {} (connected: {})", g.vertex_name(v), edges.join(" "), wg.connected);
    }
    Ok(())
}
