bool insert(int key){
  while(true){
    @@begin-traversal
    struct node * curr = root;
    while(curr->key != key){
      struct node * next = key < curr->key ? curr->left : curr->right;
      if(next == NULL)
        break;
      curr = next;
    }
    @@end-traversal
    if(key < curr->key){
      @@insert::block1
      return true;
    }
    if(key > curr->key){
      @@insert::block2
      return true;
    }
    return false;
  }
}
