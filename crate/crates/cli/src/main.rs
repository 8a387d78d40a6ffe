fn main() {
    println!("qres");
}
