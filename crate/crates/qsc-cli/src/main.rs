fn main() {
    println!("qsc");
}
