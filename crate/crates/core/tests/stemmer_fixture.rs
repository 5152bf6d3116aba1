use ementa::textprep::StemRuleSet;

const FROZEN: &[(&str, &str)] = &[
    ("casas", "cas"),
    ("meninas", "menin"),
    ("lei", "lei"),
    ("ineficácia", "ineficac"),
    ("adjudicação", "adjudic"),
    ("alienação", "alien"),
    ("caução", "cauc"),
    ("execução", "execuc"),
    ("embargos", "embarg"),
    ("penhora", "penh"),
    ("usucapião", "usucap"),
    ("imóveis", "imovel"),
    ("registro", "registr"),
    ("hipoteca", "hipotec"),
    ("alienações", "alien"),
    ("fiduciária", "fiduciar"),
    ("compromisso", "compromiss"),
    ("compra", "compr"),
    ("venda", "vend"),
    ("locação", "loc"),
    ("despejo", "despej"),
    ("condomínio", "condomini"),
    ("servidão", "serv"),
    ("possessória", "possessor"),
    ("propriedade", "propriedad"),
    ("loteamento", "lote"),
    ("averbação", "averb"),
    ("nulidade", "nulidad"),
    ("cancelamento", "cancel"),
    ("bem", "bem"),
    ("família", "famil"),
    ("arrematação", "arremat"),
    ("matrícula", "matricul"),
    ("escritura", "escrit"),
    ("rapidamente", "rapid"),
];

#[test]
fn frozen_stems() {
    let rules = StemRuleSet::rslp();
    for (word, stem) in FROZEN {
        assert_eq!(rules.stem(word), *stem, "{word}");
    }
}
